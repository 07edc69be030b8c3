"""
Discrete images and the algebra the rest of the toolkit builds on.

An image is a 2-D numpy array of real or complex pixels X[j, k] (row j,
column k, zero-based here). The discrete gradient uses forward differences
with the trailing row of X_x and trailing column of X_y forced to zero, so
the field is stored as two N x N arrays.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Tuple, Union

import numpy as np

from tvrecover.errors import InvalidInputError, UndefinedRatioError

logger = logging.getLogger(__name__)

ANISOTROPIC = "anisotropic"
ISOTROPIC = "isotropic"
TV_MODES = (ANISOTROPIC, ISOTROPIC)


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def as_image(x, square: bool = False, dyadic: bool = False, min_size: int = 1) -> np.ndarray:
    """
    Validate and return an image array.

    Args:
        x: Array-like 2-D pixel grid
        square: Require n_rows == n_cols
        dyadic: Require a square image with N a power of two
        min_size: Smallest admissible side length

    Returns:
        np.ndarray: float64 or complex128 view/copy of x
    """
    arr = np.asarray(x)
    if arr.ndim != 2:
        raise InvalidInputError(f"image must be 2-D, got shape {arr.shape}")
    if np.iscomplexobj(arr):
        arr = arr.astype(np.complex128, copy=False)
    else:
        arr = arr.astype(np.float64, copy=False)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("image contains NaN or Inf entries")
    rows, cols = arr.shape
    if min(rows, cols) < min_size:
        raise InvalidInputError(f"image sides must be at least {min_size}, got {arr.shape}")
    if (square or dyadic) and rows != cols:
        raise InvalidInputError(f"image must be square, got {arr.shape}")
    if dyadic and not is_power_of_two(rows):
        raise InvalidInputError(f"image side must be a power of two, got {rows}")
    return arr


@dataclass(frozen=True)
class GradientField:
    """Zero-padded discrete gradient: gx holds X_x, gy holds X_y."""
    gx: np.ndarray
    gy: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        return self.gx.shape

    def as_array(self) -> np.ndarray:
        """Stack into an (N, N, 2) array, component last."""
        return np.stack([self.gx, self.gy], axis=-1)

    def magnitudes(self, mode: str = ANISOTROPIC) -> np.ndarray:
        if mode == ANISOTROPIC:
            return np.abs(self.as_array())
        if mode == ISOTROPIC:
            return np.sqrt(np.abs(self.gx) ** 2 + np.abs(self.gy) ** 2)
        raise InvalidInputError(f"unknown TV mode {mode!r}; expected one of {TV_MODES}")

    def l1_norm(self, mode: str = ANISOTROPIC) -> float:
        return float(np.sum(self.magnitudes(mode)))

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.gx) ** 2) + np.sum(np.abs(self.gy) ** 2)))

    def __sub__(self, other: "GradientField") -> "GradientField":
        return GradientField(self.gx - other.gx, self.gy - other.gy)


class Placement(str, Enum):
    TOP_ZEROS = "top_zeros"
    BOTTOM_ZEROS = "bottom_zeros"


@dataclass(frozen=True)
class PaddedMatrix:
    source: np.ndarray
    placement: Placement
    realized: np.ndarray


def directional_derivatives(x) -> Tuple[np.ndarray, np.ndarray]:
    """
    Ragged directional derivatives.

    Returns:
        Tuple of X_x with shape (N-1, N) and X_y with shape (N, N-1)
    """
    x = as_image(x, square=True, min_size=2)
    return x[1:, :] - x[:-1, :], x[:, 1:] - x[:, :-1]


def gradient_pair(x) -> Tuple[np.ndarray, np.ndarray]:
    """The pair (X_x, X_y^T), both (N-1) x N, measured by the composite TV operator."""
    xx, xy = directional_derivatives(x)
    return xx, xy.T


def discrete_gradient(x) -> GradientField:
    x = as_image(x, square=True, min_size=2)
    gx = np.zeros_like(x)
    gy = np.zeros_like(x)
    gx[:-1, :] = x[1:, :] - x[:-1, :]
    gy[:, :-1] = x[:, 1:] - x[:, :-1]
    return GradientField(gx, gy)


def gradient_adjoint(g: GradientField) -> np.ndarray:
    """
    Negative discrete divergence, the adjoint of discrete_gradient.

    The trailing row of gx and trailing column of gy are ignored, matching
    the zeros discrete_gradient always puts there.
    """
    gx, gy = np.asarray(g.gx), np.asarray(g.gy)
    if gx.shape != gy.shape or gx.ndim != 2:
        raise InvalidInputError(f"gradient components must share a 2-D shape, got {gx.shape} and {gy.shape}")
    out = np.zeros(gx.shape, dtype=np.result_type(gx, gy, np.float64))
    out[1:, :] += gx[:-1, :]
    out[:-1, :] -= gx[:-1, :]
    out[:, 1:] += gy[:, :-1]
    out[:, :-1] -= gy[:, :-1]
    return out


def tv_norm(x, mode: str = ANISOTROPIC) -> float:
    return discrete_gradient(x).l1_norm(mode)


def inner_product(a, b) -> complex:
    """<a, b> = trace(a b*) = sum a_jk conj(b_jk)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise InvalidInputError(f"inner product needs equal shapes, got {a.shape} and {b.shape}")
    value = np.vdot(b, a)
    if np.iscomplexobj(a) or np.iscomplexobj(b):
        return complex(value)
    return float(value)


def pad(phi, placement: Union[Placement, str]) -> PaddedMatrix:
    """
    Concatenate a row of zeros on top (top_zeros) or at the bottom (bottom_zeros)
    of an (N-1) x N matrix.
    """
    phi = np.asarray(phi)
    if phi.ndim != 2 or phi.shape[0] != phi.shape[1] - 1:
        raise InvalidInputError(f"pad expects an (N-1) x N matrix, got shape {phi.shape}")
    try:
        placement = Placement(placement)
    except ValueError as e:
        raise InvalidInputError(f"unknown placement {placement!r}") from e
    zeros = np.zeros((1, phi.shape[1]), dtype=phi.dtype)
    if placement is Placement.TOP_ZEROS:
        realized = np.vstack([zeros, phi])
    else:
        realized = np.vstack([phi, zeros])
    return PaddedMatrix(source=phi, placement=placement, realized=realized)


def lemma_pad_identities(phi, x) -> Dict[str, complex]:
    """
    Both sides of the padded-matrix derivative identities

        <phi, X_x>   = <phi^0, X>   - <phi_0, X>
        <phi, X_y^T> = <phi^0, X^T> - <phi_0, X^T>

    where phi^0 / phi_0 carry the zero row on top / bottom and X^T is the
    non-conjugate transpose.
    """
    x = as_image(x, square=True, min_size=2)
    top = pad(phi, Placement.TOP_ZEROS).realized
    bottom = pad(phi, Placement.BOTTOM_ZEROS).realized
    xx, xyt = gradient_pair(x)
    return {
        "x_lhs": inner_product(phi, xx),
        "x_rhs": inner_product(top, x) - inner_product(bottom, x),
        "y_lhs": inner_product(phi, xyt),
        "y_rhs": inner_product(top, x.T) - inner_product(bottom, x.T),
    }


def best_s_term(v, s: int) -> np.ndarray:
    """
    Keep the s largest-magnitude entries of v (any shape), zero the rest.
    Ties are broken by flat index order.
    """
    v = np.asarray(v)
    if s < 0:
        raise InvalidInputError(f"s must be non-negative, got {s}")
    flat = v.ravel()
    out = np.zeros_like(flat)
    if s > 0:
        keep = np.argsort(-np.abs(flat), kind="stable")[:s]
        out[keep] = flat[keep]
    return out.reshape(v.shape)


def best_s_term_gradient_error(x, s: int) -> float:
    """l1 norm of the gradient field after removing its s largest entries."""
    field = discrete_gradient(x).as_array()
    if s > field.size:
        raise InvalidInputError(f"s must be at most 2N^2 = {field.size}, got {s}")
    return float(np.sum(np.abs(field - best_s_term(field, s))))


SOBOLEV_BOUNDS = {"zero_border": 0.5, "mean_zero": 1.0, "zero_pixel": 1.0}


def sobolev_ratio(x, form: str = "mean_zero") -> float:
    """
    ||x||_2 / ||x||_TV for an image satisfying the hypothesis of `form`:

    - zero_border: first row and first column vanish (ratio <= 1/2)
    - mean_zero: pixels sum to zero (ratio <= 1)
    - zero_pixel: at least one pixel vanishes (ratio <= 1)
    """
    if form not in SOBOLEV_BOUNDS:
        raise InvalidInputError(f"unknown Sobolev form {form!r}; expected one of {sorted(SOBOLEV_BOUNDS)}")
    x = as_image(x, square=True, min_size=2)
    scale = max(float(np.max(np.abs(x))), 1.0)
    tol = 1e-12 * scale
    if form == "zero_border" and (np.max(np.abs(x[0, :])) > tol or np.max(np.abs(x[:, 0])) > tol):
        raise InvalidInputError("zero_border form needs a vanishing first row and first column")
    if form == "mean_zero" and abs(np.sum(x)) > tol * x.size:
        raise InvalidInputError("mean_zero form needs pixels summing to zero")
    if form == "zero_pixel" and np.min(np.abs(x)) > tol:
        raise InvalidInputError("zero_pixel form needs at least one vanishing pixel")
    tv = tv_norm(x)
    norm = float(np.linalg.norm(x))
    if tv == 0.0:
        if norm == 0.0:
            return 0.0
        raise UndefinedRatioError("Sobolev ratio is undefined for a non-zero constant image")
    return norm / tv
