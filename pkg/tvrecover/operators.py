"""
Linear measurement operators Image -> C^m with adjoints.

Every operator acts on an image through the bilinear pairing
y_j = sum_ab A_j[a, b] X[a, b]; the adjoint is the conjugate transpose, so
<op(x), y> = <x, op.adjoint(y)> under the trace inner product.
"""
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from tvrecover.errors import InvalidInputError
from tvrecover.haar import haar_forward, haar_inverse
from tvrecover.image_core import Placement, as_image, gradient_pair, is_power_of_two, pad

logger = logging.getLogger(__name__)

MAX_DENSE_DIM = 2 ** 14


class MeasurementOp(ABC):
    kind = "abstract"
    guarantee = "none"

    def __init__(self, m: int, input_shape: Tuple[int, int]):
        if m < 1:
            raise InvalidInputError(f"measurement count must be positive, got {m}")
        self.m = int(m)
        self.input_shape = (int(input_shape[0]), int(input_shape[1]))

    @property
    def d(self) -> int:
        return self.input_shape[0] * self.input_shape[1]

    @abstractmethod
    def apply(self, x) -> np.ndarray:
        """Measure an image; returns a length-m vector."""

    @abstractmethod
    def adjoint(self, y) -> np.ndarray:
        """Back-project a length-m vector to an image."""

    def __call__(self, x) -> np.ndarray:
        return self.apply(x)

    def _check_image(self, x) -> np.ndarray:
        x = np.asarray(x)
        if x.shape != self.input_shape:
            raise InvalidInputError(f"{self.kind} operator expects shape {self.input_shape}, got {x.shape}")
        return x

    def _check_vector(self, y) -> np.ndarray:
        y = np.asarray(y)
        if y.shape != (self.m,):
            raise InvalidInputError(f"{self.kind} operator expects a vector of length {self.m}, got {y.shape}")
        return y

    def matrix(self) -> np.ndarray:
        """
        Materialize the m x d matrix acting on row-major vectorized images.

        Raises:
            InvalidInputError: if d exceeds MAX_DENSE_DIM
        """
        if self.d > MAX_DENSE_DIM:
            raise InvalidInputError(f"refusing to materialize an operator with d = {self.d} > {MAX_DENSE_DIM}")
        columns = []
        basis = np.zeros(self.d)
        for i in range(self.d):
            basis[i] = 1.0
            columns.append(self.apply(basis.reshape(self.input_shape)))
            basis[i] = 0.0
        return np.stack(columns, axis=1)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "m": self.m,
            "shape": list(self.input_shape),
            "guarantee": self.guarantee,
        }


class DenseOp(MeasurementOp):
    """Explicit matrix operator; kinds 'dense' and 'gaussian'."""

    def __init__(self, mat, input_shape: Tuple[int, int], kind: str = "dense",
                 seed: Optional[int] = None, label: Optional[str] = None):
        mat = np.asarray(mat)
        if mat.ndim != 2 or mat.shape[1] != input_shape[0] * input_shape[1]:
            raise InvalidInputError(f"matrix shape {mat.shape} does not act on images of shape {input_shape}")
        super().__init__(mat.shape[0], input_shape)
        self.kind = kind
        self.guarantee = "haar_incoherent" if kind == "gaussian" else "none"
        self.seed = seed
        self.label = label
        self._mat = mat

    def apply(self, x) -> np.ndarray:
        return self._mat @ self._check_image(x).ravel()

    def adjoint(self, y) -> np.ndarray:
        return (self._mat.conj().T @ self._check_vector(y)).reshape(self.input_shape)

    def matrix(self) -> np.ndarray:
        return self._mat

    def to_dict(self):
        desc = super().to_dict()
        if self.kind == "gaussian":
            desc["seed"] = self.seed
        elif self.label == "identity":
            desc["label"] = "identity"
        elif np.iscomplexobj(self._mat):
            desc["matrix"] = {"real": self._mat.real.tolist(), "imag": self._mat.imag.tolist()}
        else:
            desc["matrix"] = self._mat.tolist()
        return desc


class FourierOp(MeasurementOp):
    """
    Subsampled 2-D unitary DFT, optionally after a random +-1 sign pattern.
    Rows are scaled by sqrt(N^2 / m) so full sampling is an isometry.
    """

    def __init__(self, m: int, n: int, seed: int, signed: bool = True):
        if n < 1:
            raise InvalidInputError(f"image side must be positive, got {n}")
        if m > n * n:
            raise InvalidInputError(f"cannot sample m = {m} rows from an {n}x{n} DFT")
        super().__init__(m, (n, n))
        self.n = n
        self.seed = seed
        self.signed = signed
        self.kind = "fourier_signed" if signed else "fourier_plain"
        self.guarantee = "haar_incoherent" if signed else "none"
        rng = np.random.default_rng(seed)
        self.omega = np.sort(rng.choice(n * n, size=m, replace=False))
        if signed:
            self.signs = rng.choice(np.array([-1.0, 1.0]), size=(n, n))
        else:
            self.signs = np.ones((n, n))
        self.scale = math.sqrt(n * n / m)

    def apply(self, x) -> np.ndarray:
        x = self._check_image(x)
        full = np.fft.fft2(self.signs * x, norm="ortho").ravel()
        return full[self.omega] * self.scale

    def adjoint(self, y) -> np.ndarray:
        y = self._check_vector(y)
        full = np.zeros(self.n * self.n, dtype=np.complex128)
        full[self.omega] = y * self.scale
        return self.signs * np.fft.ifft2(full.reshape(self.n, self.n), norm="ortho")

    def to_dict(self):
        desc = super().to_dict()
        desc.update({
            "seed": self.seed,
            "signed": self.signed,
            "omega": self.omega.tolist(),
            "signs": self.signs.astype(int).ravel().tolist(),
        })
        return desc


class PaddedOp(MeasurementOp):
    """
    Lifts an operator on (N-1) x N matrices to N x N images by zero-padding
    every row matrix A_j on top (top_zeros) or at the bottom (bottom_zeros).
    """
    kind = "padded"

    def __init__(self, base: MeasurementOp, placement):
        rows, cols = base.input_shape
        if rows != cols - 1:
            raise InvalidInputError(f"padded operator needs a base acting on (N-1) x N, got {base.input_shape}")
        super().__init__(base.m, (cols, cols))
        self.base = base
        self.placement = Placement(placement)

    def apply(self, x) -> np.ndarray:
        x = self._check_image(x)
        if self.placement is Placement.TOP_ZEROS:
            return self.base.apply(x[1:, :])
        return self.base.apply(x[:-1, :])

    def adjoint(self, y) -> np.ndarray:
        return pad(self.base.adjoint(self._check_vector(y)), self.placement).realized

    def to_dict(self):
        desc = super().to_dict()
        desc.update({"placement": self.placement.value, "base": self.base.to_dict()})
        return desc


class TransposedOp(MeasurementOp):
    """X -> base(X^T) with the non-conjugate transpose."""
    kind = "transposed"

    def __init__(self, base: MeasurementOp):
        rows, cols = base.input_shape
        super().__init__(base.m, (cols, rows))
        self.base = base

    def apply(self, x) -> np.ndarray:
        return self.base.apply(self._check_image(x).T)

    def adjoint(self, y) -> np.ndarray:
        return self.base.adjoint(self._check_vector(y)).T

    def to_dict(self):
        desc = super().to_dict()
        desc["base"] = self.base.to_dict()
        return desc


class CompositeTVOp(MeasurementOp):
    """
    M(X) = (A^0(X), A_0(X), A'^0(X^T), A'_0(X^T), B(X)), m = 4 m1 + m2.

    A and A' act on (N-1) x N matrices and measure the directional derivatives
    through their padded versions; B acts on the image directly.
    """
    kind = "composite_tv"
    guarantee = "stable_gradient"

    def __init__(self, a: MeasurementOp, a_prime: MeasurementOp, b: MeasurementOp):
        n_rows, n_cols = b.input_shape
        if n_rows != n_cols:
            raise InvalidInputError(f"B must act on square images, got {b.input_shape}")
        expected = (n_cols - 1, n_cols)
        if a.input_shape != expected or a_prime.input_shape != expected:
            raise InvalidInputError(
                f"A and A' must act on {expected}, got {a.input_shape} and {a_prime.input_shape}")
        if a.m != a_prime.m:
            raise InvalidInputError(f"A and A' must share m1, got {a.m} and {a_prime.m}")
        super().__init__(4 * a.m + b.m, b.input_shape)
        self.a = a
        self.a_prime = a_prime
        self.b = b
        self.blocks: List[MeasurementOp] = [
            PaddedOp(a, Placement.TOP_ZEROS),
            PaddedOp(a, Placement.BOTTOM_ZEROS),
            TransposedOp(PaddedOp(a_prime, Placement.TOP_ZEROS)),
            TransposedOp(PaddedOp(a_prime, Placement.BOTTOM_ZEROS)),
            b,
        ]
        bounds = np.cumsum([0] + [blk.m for blk in self.blocks])
        self._slices = [slice(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:])]

    @property
    def m1(self) -> int:
        return self.a.m

    @property
    def m2(self) -> int:
        return self.b.m

    def apply(self, x) -> np.ndarray:
        x = self._check_image(x)
        return np.concatenate([blk.apply(x) for blk in self.blocks])

    def adjoint(self, y) -> np.ndarray:
        y = self._check_vector(y)
        parts = [blk.adjoint(y[sl]) for blk, sl in zip(self.blocks, self._slices)]
        out = np.zeros(self.input_shape, dtype=np.result_type(*parts))
        for part in parts:
            out = out + part
        return out

    def split(self, y) -> List[np.ndarray]:
        """Cut a measurement vector into its five blocks."""
        y = self._check_vector(y)
        return [y[sl] for sl in self._slices]

    def gradient_measurements(self, x) -> np.ndarray:
        """[A A'](L) = (A(X_x), A'(X_y^T))."""
        xx, xyt = gradient_pair(x)
        return np.concatenate([self.a.apply(xx), self.a_prime.apply(xyt)])

    def to_dict(self):
        desc = super().to_dict()
        desc.update({
            "m1": self.m1,
            "m2": self.m2,
            "a": self.a.to_dict(),
            "a_prime": self.a_prime.to_dict(),
            "b": self.b.to_dict(),
        })
        return desc


class HaarComposedOp(MeasurementOp):
    """c -> base(H^-1 c); the adjoint is H o base*."""
    kind = "haar_composed"

    def __init__(self, base: MeasurementOp):
        rows, cols = base.input_shape
        if rows != cols or not is_power_of_two(rows):
            raise InvalidInputError(f"Haar composition needs N x N with N a power of two, got {base.input_shape}")
        super().__init__(base.m, base.input_shape)
        self.base = base
        self.guarantee = base.guarantee

    def apply(self, c) -> np.ndarray:
        return self.base.apply(haar_inverse(self._check_image(c)))

    def adjoint(self, y) -> np.ndarray:
        return haar_forward(self.base.adjoint(y)).coeffs

    def to_dict(self):
        desc = super().to_dict()
        desc["base"] = self.base.to_dict()
        return desc


def identity_op(rows: int, cols: int) -> DenseOp:
    return DenseOp(np.eye(rows * cols), (rows, cols), kind="dense", label="identity")


def gaussian_op(m: int, rows: int, cols: int, seed: int) -> DenseOp:
    """
    Dense operator with i.i.d. Normal(0, 1/m) entries.

    Args:
        m: Number of measurements
        rows: Input image rows
        cols: Input image columns
        seed: Generator seed

    Returns:
        DenseOp: kind 'gaussian'
    """
    if m < 1:
        raise InvalidInputError(f"measurement count must be positive, got {m}")
    d = rows * cols
    if d > MAX_DENSE_DIM:
        raise InvalidInputError(f"gaussian operators are dense and limited to d <= {MAX_DENSE_DIM}, got {d}")
    rng = np.random.default_rng(seed)
    mat = rng.normal(0.0, 1.0 / math.sqrt(m), size=(m, d))
    return DenseOp(mat, (rows, cols), kind="gaussian", seed=seed)


def fourier_signed_op(m: int, n: int, seed: int) -> FourierOp:
    return FourierOp(m, n, seed, signed=True)


def fourier_plain_op(m: int, n: int, seed: int) -> FourierOp:
    return FourierOp(m, n, seed, signed=False)


def composite_tv_op(a: MeasurementOp, a_prime: MeasurementOp, b: MeasurementOp) -> CompositeTVOp:
    return CompositeTVOp(a, a_prime, b)


def gaussian_composite_op(n: int, m1: int, m2: int, seed: int) -> CompositeTVOp:
    """Composite operator with independent Gaussian blocks seeded seed, seed+1, seed+2."""
    a = gaussian_op(m1, n - 1, n, seed)
    a_prime = gaussian_op(m1, n - 1, n, seed + 1)
    b = gaussian_op(m2, n, n, seed + 2)
    return CompositeTVOp(a, a_prime, b)


def compose_with_inverse_haar(op: MeasurementOp) -> HaarComposedOp:
    return HaarComposedOp(op)


def estimate_operator_norm(op: MeasurementOp, n_iter: int = 20, seed: int = 0) -> float:
    """Power-method estimate of the spectral norm of op."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(op.input_shape)
    x = x / np.linalg.norm(x)
    value = 0.0
    for _ in range(n_iter):
        z = op.adjoint(op.apply(x))
        value = float(np.linalg.norm(z))
        if value == 0.0:
            return 0.0
        x = z / value
    return math.sqrt(value)


def operator_from_dict(desc: Dict[str, Any]) -> MeasurementOp:
    """Rebuild an operator from its to_dict() descriptor."""
    try:
        kind = desc["kind"]
        if kind == "gaussian":
            rows, cols = desc["shape"]
            return gaussian_op(desc["m"], rows, cols, desc["seed"])
        if kind in ("fourier_signed", "fourier_plain"):
            op = FourierOp(desc["m"], desc["shape"][0], desc["seed"], signed=(kind == "fourier_signed"))
            if "omega" in desc and op.omega.tolist() != list(desc["omega"]):
                raise InvalidInputError("descriptor row subset does not match its seed")
            return op
        if kind == "dense":
            rows, cols = desc["shape"]
            if desc.get("label") == "identity":
                return identity_op(rows, cols)
            mat = desc["matrix"]
            if isinstance(mat, dict):
                mat = np.asarray(mat["real"]) + 1j * np.asarray(mat["imag"])
            return DenseOp(np.asarray(mat), (rows, cols))
        if kind == "padded":
            return PaddedOp(operator_from_dict(desc["base"]), desc["placement"])
        if kind == "transposed":
            return TransposedOp(operator_from_dict(desc["base"]))
        if kind == "composite_tv":
            return CompositeTVOp(operator_from_dict(desc["a"]),
                                 operator_from_dict(desc["a_prime"]),
                                 operator_from_dict(desc["b"]))
        if kind == "haar_composed":
            return HaarComposedOp(operator_from_dict(desc["base"]))
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, InvalidInputError):
            raise
        raise InvalidInputError(f"malformed operator descriptor: {e}") from e
    raise InvalidInputError(f"unknown operator kind {desc.get('kind')!r}")


NOISE_KINDS = ("none", "gaussian", "quantization")


@dataclass(frozen=True)
class NoiseModel:
    """
    Additive measurement noise. Gaussian noise on complex measurements splits
    the variance evenly between real and imaginary parts.
    """
    kind: str = "none"
    sigma: float = 0.0
    delta: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise InvalidInputError(f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}")
        if self.kind == "gaussian" and self.sigma < 0:
            raise InvalidInputError(f"noise sigma must be non-negative, got {self.sigma}")
        if self.kind == "quantization" and self.delta <= 0:
            raise InvalidInputError(f"quantization step must be positive, got {self.delta}")

    def to_dict(self):
        return {"kind": self.kind, "sigma": self.sigma, "delta": self.delta, "seed": self.seed}


def add_noise(y, model: NoiseModel) -> Tuple[np.ndarray, float]:
    """
    Corrupt a measurement vector.

    Returns:
        Tuple of the noisy vector and eps = ||y_noisy - y||_2
    """
    y = np.asarray(y)
    if model.kind == "none" or (model.kind == "gaussian" and model.sigma == 0):
        return y.copy(), 0.0
    if model.kind == "gaussian":
        rng = np.random.default_rng(model.seed)
        if np.iscomplexobj(y):
            scale = model.sigma / math.sqrt(2.0)
            xi = rng.normal(0.0, scale, size=y.shape) + 1j * rng.normal(0.0, scale, size=y.shape)
        else:
            xi = rng.normal(0.0, model.sigma, size=y.shape)
        noisy = y + xi
    else:
        step = model.delta
        if np.iscomplexobj(y):
            noisy = step * (np.round(y.real / step) + 1j * np.round(y.imag / step))
        else:
            noisy = step * np.round(y / step)
    eps = float(np.linalg.norm(noisy - y))
    logger.debug(f"Added {model.kind} noise with eps = {eps:.3e}")
    return noisy, eps
