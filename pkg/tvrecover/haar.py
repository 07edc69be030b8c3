"""
Discrete bivariate Haar transform on N x N images, N = 2**n.

Coefficient layout (frozen, so coefficient arrays serialize deterministically):

    [0, 0]                                  DC, basis image 1/N everywhere
    rows [0, 2**j),        cols [2**j, 2**(j+1))   e = (0, 1) at level j
    rows [2**j, 2**(j+1)), cols [0, 2**j)          e = (1, 0) at level j
    rows [2**j, 2**(j+1)), cols [2**j, 2**(j+1))   e = (1, 1) at level j

Inside each level block the cell (k1, k2) holds the translate k = (k1, k2).
The first component of e acts along rows, the second along columns, and
the mother wavelet is +1 on the first half of its support, -1 on the second.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np

from tvrecover.errors import InvalidInputError, UndefinedRatioError
from tvrecover.image_core import as_image, tv_norm

logger = logging.getLogger(__name__)

C1 = 36.0 * (480.0 * math.sqrt(5.0) + 168.0 * math.sqrt(3.0))

DIRECTIONS: Tuple[Tuple[int, int], ...] = ((0, 1), (1, 0), (1, 1))


@dataclass(frozen=True)
class WaveletIndex:
    """A basis image label; e=None marks the DC (constant) image."""
    e: Optional[Tuple[int, int]]
    j: int = 0
    k: Tuple[int, int] = (0, 0)

    @classmethod
    def dc(cls) -> "WaveletIndex":
        return cls(e=None)

    @property
    def is_dc(self) -> bool:
        return self.e is None

    def validate(self, n: int) -> None:
        if self.is_dc:
            return
        if tuple(self.e) not in DIRECTIONS:
            raise InvalidInputError(f"wavelet direction must be one of {DIRECTIONS}, got {self.e}")
        if not 0 <= self.j < n:
            raise InvalidInputError(f"wavelet level must lie in [0, {n}), got {self.j}")
        side = 2 ** self.j
        if not all(0 <= kk < side for kk in self.k):
            raise InvalidInputError(f"translate {self.k} out of range for level {self.j}")

    def to_dict(self):
        if self.is_dc:
            return {"e": None}
        return {"e": list(self.e), "j": self.j, "k": list(self.k)}


@dataclass(frozen=True)
class HaarCoeffs:
    n: int
    coeffs: np.ndarray

    @property
    def size(self) -> int:
        return 2 ** self.n

    def __getitem__(self, idx: WaveletIndex):
        return self.coeffs[coefficient_position(idx, self.n)]

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


def coefficient_position(idx: WaveletIndex, n: int) -> Tuple[int, int]:
    """Cell of the frozen layout holding the coefficient for idx."""
    idx.validate(n)
    if idx.is_dc:
        return 0, 0
    side = 2 ** idx.j
    k1, k2 = idx.k
    row_off = side if idx.e[0] == 1 else 0
    col_off = side if idx.e[1] == 1 else 0
    return row_off + k1, col_off + k2


def index_at(row: int, col: int, n: int) -> WaveletIndex:
    """Inverse of coefficient_position."""
    size = 2 ** n
    if not (0 <= row < size and 0 <= col < size):
        raise InvalidInputError(f"cell ({row}, {col}) outside a {size}x{size} layout")
    if row == 0 and col == 0:
        return WaveletIndex.dc()
    j = max(row, col).bit_length() - 1
    side = 2 ** j
    e = (int(row >= side), int(col >= side))
    return WaveletIndex(e=e, j=j, k=(row - side * e[0], col - side * e[1]))


def all_wavelet_indices(n: int) -> Iterator[WaveletIndex]:
    """DC first, then level by level, direction by direction, translates row-major."""
    yield WaveletIndex.dc()
    for j in range(n):
        side = 2 ** j
        for e in DIRECTIONS:
            for k1, k2 in itertools.product(range(side), range(side)):
                yield WaveletIndex(e=e, j=j, k=(k1, k2))


def haar_forward(x) -> HaarCoeffs:
    """
    Bivariate Haar coefficients <x, h> by recursive 2x2 averaging and differencing.

    Args:
        x: N x N image with N a power of two

    Returns:
        HaarCoeffs: coefficients in the frozen layout
    """
    x = as_image(x, dyadic=True)
    n = x.shape[0].bit_length() - 1
    out = np.zeros_like(x)
    approx = x
    for j in range(n - 1, -1, -1):
        side = 2 ** j
        a, b = approx[0::2, 0::2], approx[0::2, 1::2]
        c, d = approx[1::2, 0::2], approx[1::2, 1::2]
        out[0:side, side:2 * side] = (a - b + c - d) / 2
        out[side:2 * side, 0:side] = (a + b - c - d) / 2
        out[side:2 * side, side:2 * side] = (a - b - c + d) / 2
        approx = (a + b + c + d) / 2
    out[0, 0] = approx[0, 0]
    return HaarCoeffs(n=n, coeffs=out)


def haar_inverse(c) -> np.ndarray:
    coeffs = c.coeffs if isinstance(c, HaarCoeffs) else c
    coeffs = as_image(coeffs, dyadic=True)
    n = coeffs.shape[0].bit_length() - 1
    approx = coeffs[0:1, 0:1]
    for j in range(n):
        side = 2 ** j
        e01 = coeffs[0:side, side:2 * side]
        e10 = coeffs[side:2 * side, 0:side]
        e11 = coeffs[side:2 * side, side:2 * side]
        nxt = np.empty((2 * side, 2 * side), dtype=coeffs.dtype)
        nxt[0::2, 0::2] = (approx + e10 + e01 + e11) / 2
        nxt[0::2, 1::2] = (approx + e10 - e01 - e11) / 2
        nxt[1::2, 0::2] = (approx - e10 + e01 - e11) / 2
        nxt[1::2, 1::2] = (approx - e10 - e01 + e11) / 2
        approx = nxt
    return approx.copy()


def _mother(bit: int, length: int) -> np.ndarray:
    if bit == 0:
        return np.ones(length)
    half = length // 2
    return np.concatenate([np.ones(half), -np.ones(half)])


def wavelet_image(idx: WaveletIndex, n: int) -> np.ndarray:
    """
    Discrete basis image for idx: unit l2 norm, magnitude 2**(j-n) on a
    dyadic square of side 2**(n-j) pixels.
    """
    if n < 0:
        raise InvalidInputError(f"scale count must be non-negative, got {n}")
    idx.validate(n)
    size = 2 ** n
    if idx.is_dc:
        return np.full((size, size), 1.0 / size)
    side = 2 ** (n - idx.j)
    patch = np.outer(_mother(idx.e[0], side), _mother(idx.e[1], side)) * 2.0 ** (idx.j - n)
    img = np.zeros((size, size))
    r0, c0 = idx.k[0] * side, idx.k[1] * side
    img[r0:r0 + side, c0:c0 + side] = patch
    return img


def wavelet_value(idx: WaveletIndex, n: int, row: int, col: int) -> float:
    """Single pixel of wavelet_image(idx, n) without building the image."""
    size = 2 ** n
    if idx.is_dc:
        return 1.0 / size
    side = 2 ** (n - idx.j)
    dr, dc = row - idx.k[0] * side, col - idx.k[1] * side
    if not (0 <= dr < side and 0 <= dc < side):
        return 0.0
    half = side // 2
    sign_r = -1.0 if idx.e[0] == 1 and dr >= half else 1.0
    sign_c = -1.0 if idx.e[1] == 1 and dc >= half else 1.0
    return sign_r * sign_c * 2.0 ** (idx.j - n)


def haar_matrix(n: int) -> np.ndarray:
    """
    N^2 x N^2 unitary matrix built from the wavelet images themselves. Row r is
    the flattened basis image whose coefficient sits at flat layout position r,
    so haar_matrix(n) @ x.ravel() == haar_forward(x).coeffs.ravel().
    """
    size = 2 ** n
    mat = np.zeros((size * size, size * size))
    for idx in all_wavelet_indices(n):
        r, c = coefficient_position(idx, n)
        mat[r * size + c] = wavelet_image(idx, n).ravel()
    return mat


def sorted_coeff_magnitudes(c: HaarCoeffs) -> np.ndarray:
    return np.sort(np.abs(c.coeffs).ravel())[::-1]


def decay_ratio(x) -> float:
    """
    Empirical decay constant max_k k * |c_(k)| / ||x||_TV.

    Raises:
        UndefinedRatioError: if x is constant
    """
    x = as_image(x, dyadic=True)
    tv = tv_norm(x)
    if tv == 0.0:
        raise UndefinedRatioError("decay ratio is undefined for a constant image (TV = 0)")
    mags = sorted_coeff_magnitudes(haar_forward(x))
    ranks = np.arange(1, mags.size + 1)
    return float(np.max(ranks * mags) / tv)


def _validate_edge(edge, n: int) -> Tuple[Tuple[int, int], Tuple[int, int]]:
    try:
        (r1, c1), (r2, c2) = edge
    except (TypeError, ValueError) as e:
        raise InvalidInputError(f"edge must be a pair of (row, col) pixels, got {edge!r}") from e
    size = 2 ** n
    for r, c in ((r1, c1), (r2, c2)):
        if not (0 <= r < size and 0 <= c < size):
            raise InvalidInputError(f"pixel ({r}, {c}) lies outside a {size}x{size} grid")
    if abs(r1 - r2) + abs(c1 - c2) != 1:
        raise InvalidInputError(f"pixels {(r1, c1)} and {(r2, c2)} are not adjacent")
    return (r1, c1), (r2, c2)


def edge_nonconstant_count(edge, n: int) -> int:
    """
    Number of basis images taking different values on the two pixels of an
    edge. Only the translate containing each pixel can be non-zero there, so
    each (level, direction) contributes at most two candidates.
    """
    p, q = _validate_edge(edge, n)
    count = 0
    for j in range(n):
        side = 2 ** (n - j)
        translates = {(p[0] // side, p[1] // side), (q[0] // side, q[1] // side)}
        for e in DIRECTIONS:
            for k in translates:
                idx = WaveletIndex(e=e, j=j, k=k)
                if wavelet_value(idx, n, *p) != wavelet_value(idx, n, *q):
                    count += 1
    return count


def all_edges(n: int) -> Iterator[Tuple[Tuple[int, int], Tuple[int, int]]]:
    size = 2 ** n
    for r in range(size):
        for c in range(size):
            if r + 1 < size:
                yield (r, c), (r + 1, c)
            if c + 1 < size:
                yield (r, c), (r, c + 1)


def wavelet_gradient_l1(idx: WaveletIndex, n: int) -> float:
    return tv_norm(wavelet_image(idx, n)) if n > 0 else 0.0


def bv_seminorm(x, refinement: int = 2) -> float:
    """
    Bounded-variation semi-norm of the piecewise-constant function that takes
    the value N * X[j, k] on pixel square (j, k) of the unit square.

    The difference quotient is evaluated at the shift h = 1 / (N * refinement);
    for any h <= 1/N it is exact, so the result equals the anisotropic TV of x.
    """
    if refinement < 1:
        raise InvalidInputError(f"refinement must be at least 1, got {refinement}")
    x = as_image(x, square=True, min_size=2)
    size = x.shape[0]
    fine_size = size * refinement
    f = np.kron(size * x, np.ones((refinement, refinement)))
    cell_area = 1.0 / fine_size ** 2
    h = 1.0 / fine_size
    along_u = np.sum(np.abs(f[1:, :] - f[:-1, :])) * cell_area
    along_v = np.sum(np.abs(f[:, 1:] - f[:, :-1])) * cell_area
    return float((along_u + along_v) / h)

