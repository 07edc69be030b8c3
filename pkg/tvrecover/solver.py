"""
Convex decoders for

    (TV)   min ||Z||_TV      s.t. ||M(Z) - y||_2 <= eps
    (BL1)  min ||H(Z)||_1    s.t. ||M(Z) - y||_2 <= eps
    (L1)   min ||z||_1       s.t. ||A z - y||_2 <= eps

all solved with the first-order primal-dual (Chambolle-Pock) iteration.
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from tvrecover.errors import InvalidInputError
from tvrecover.haar import haar_inverse
from tvrecover.image_core import (
    ANISOTROPIC,
    ISOTROPIC,
    TV_MODES,
    GradientField,
    discrete_gradient,
    gradient_adjoint,
    tv_norm,
)
from tvrecover.operators import DenseOp, HaarComposedOp, MeasurementOp, estimate_operator_norm

logger = logging.getLogger(__name__)

# ||grad||^2 <= 8 on N x N images
GRADIENT_NORM_SQ = 8.0
# power-method estimates approach the norm from below
NORM_SAFETY = 1.1
ZERO_EPS_FACTOR = 1e-12
# an infeasible run stops early only after STAGNATION_WINDOW iterations with
# no residual drop of STAGNATION_DROP (relative) while the residual exceeds
# STAGNATION_FACTOR times the feasibility radius
STAGNATION_WINDOW = 200
STAGNATION_DROP = 1e-3
STAGNATION_FACTOR = 10.0


@dataclass
class SolverConfig:
    max_iters: int = 2000
    rel_tol: float = 1e-6
    feas_slack: float = 1e-4
    feas_floor: float = 1e-6
    step_ratio: float = 1.0
    power_iters: int = 20
    power_seed: int = 0
    tv_mode: str = ANISOTROPIC
    real_images: bool = True
    log_every: int = 100

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidInputError(f"max_iters must be positive, got {self.max_iters}")
        if self.rel_tol <= 0 or self.feas_slack <= 0:
            raise InvalidInputError("rel_tol and feas_slack must be positive")
        if self.feas_floor < 0:
            raise InvalidInputError(f"feas_floor must be non-negative, got {self.feas_floor}")
        if self.step_ratio <= 0:
            raise InvalidInputError(f"step_ratio must be positive, got {self.step_ratio}")
        if self.tv_mode not in TV_MODES:
            raise InvalidInputError(f"unknown TV mode {self.tv_mode!r}; expected one of {TV_MODES}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "SolverConfig":
        data = dict(data or {})
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidInputError(f"unknown solver settings: {sorted(unknown)}")
        return cls(**data)


@dataclass
class ReconstructionResult:
    estimate: np.ndarray
    iterations: int
    residual: float
    objective: float
    converged: bool
    eps: float
    best_objective: float
    history: List[Tuple[float, float]] = field(default_factory=list)

    def to_dict(self, include_history: bool = False) -> Dict[str, Any]:
        out = {
            "iterations": self.iterations,
            "residual": self.residual,
            "objective": self.objective,
            "converged": self.converged,
            "eps": self.eps,
            "best_objective": self.best_objective,
        }
        if include_history:
            out["history"] = [list(h) for h in self.history]
        return out


def _project_ball(u: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    r = u - center
    dist = np.linalg.norm(r)
    if dist <= radius:
        return u
    return center + r * (radius / dist)


def _ball_dual_prox(u: np.ndarray, sigma: float, y: np.ndarray, radius: float) -> np.ndarray:
    # Moreau: prox of the conjugate of the ball indicator
    return u - sigma * _project_ball(u / sigma, y, radius)


def _clip_unit(values: np.ndarray) -> np.ndarray:
    return values / np.maximum(1.0, np.abs(values))


def _soft_threshold(values: np.ndarray, tau: float) -> np.ndarray:
    mag = np.abs(values)
    shrink = np.maximum(0.0, 1.0 - tau / np.maximum(mag, np.finfo(float).tiny))
    return values * shrink


class PrimalDualSolver:
    """
    Chambolle-Pock iteration for eps-ball constrained TV and l1 programs.

    The TV program dualizes both the TV term and the data ball over
    K = [grad; A]; the l1 program keeps soft thresholding as the primal prox
    and dualizes the ball over K = A.
    """

    def __init__(self, config: Optional[SolverConfig] = None):
        self.config = config or SolverConfig()

    def _effective_eps(self, y: np.ndarray, eps: float) -> float:
        if eps < 0:
            raise InvalidInputError(f"eps must be non-negative, got {eps}")
        if eps == 0:
            return ZERO_EPS_FACTOR * float(np.linalg.norm(y))
        return float(eps)

    def _feasibility_radius(self, y: np.ndarray, eps: float) -> float:
        cfg = self.config
        return eps * (1.0 + cfg.feas_slack) + cfg.feas_floor * float(np.linalg.norm(y))

    def _steps(self, op_norm_sq: float) -> Tuple[float, float]:
        lipschitz = math.sqrt(op_norm_sq) * NORM_SAFETY
        if lipschitz == 0.0:
            return 1.0, 1.0
        tau = self.config.step_ratio / lipschitz
        sigma = 1.0 / (self.config.step_ratio * lipschitz)
        return tau, sigma

    def _primal_dtype(self):
        return np.float64 if self.config.real_images else np.complex128

    def tv(self, op: MeasurementOp, y, eps: float) -> ReconstructionResult:
        cfg = self.config
        y = np.asarray(y)
        if op.input_shape[0] != op.input_shape[1]:
            raise InvalidInputError(f"TV decoding needs square images, got {op.input_shape}")
        if y.shape != (op.m,):
            raise InvalidInputError(f"measurement vector has shape {y.shape}, expected ({op.m},)")
        radius = self._effective_eps(y, eps)
        feasible_at = self._feasibility_radius(y, float(eps))
        a_norm = estimate_operator_norm(op, cfg.power_iters, cfg.power_seed)
        tau, sigma = self._steps(GRADIENT_NORM_SQ + a_norm ** 2)
        logger.info(f"TV solve: shape={op.input_shape}, m={op.m}, eps={eps:.3e}, "
                    f"||A||~{a_norm:.3f}, tau={tau:.3e}, sigma={sigma:.3e}")

        dtype = self._primal_dtype()
        x = np.zeros(op.input_shape, dtype=dtype)
        x_bar = x.copy()
        px = np.zeros(op.input_shape, dtype=dtype)
        py = np.zeros(op.input_shape, dtype=dtype)
        q = np.zeros(op.m, dtype=np.result_type(y, dtype))

        def project_gradient_dual(gx, gy):
            if cfg.tv_mode == ISOTROPIC:
                mag = np.maximum(1.0, np.sqrt(np.abs(gx) ** 2 + np.abs(gy) ** 2))
                return gx / mag, gy / mag
            return _clip_unit(gx), _clip_unit(gy)

        def step(x, x_bar, state):
            px, py, q = state
            grad = discrete_gradient(x_bar)
            px, py = project_gradient_dual(px + sigma * grad.gx, py + sigma * grad.gy)
            q = _ball_dual_prox(q + sigma * op.apply(x_bar), sigma, y, radius)
            update = gradient_adjoint(GradientField(px, py)) + op.adjoint(q)
            x_new = x - tau * update
            if cfg.real_images:
                x_new = np.real(x_new)
            return x_new, (px, py, q)

        return self._iterate(
            "TV", op, y, radius, feasible_at, x, x_bar, (px, py, q), step,
            objective=lambda z: tv_norm(z, cfg.tv_mode))

    def l1(self, op: MeasurementOp, y, eps: float) -> ReconstructionResult:
        cfg = self.config
        y = np.asarray(y)
        if y.shape != (op.m,):
            raise InvalidInputError(f"measurement vector has shape {y.shape}, expected ({op.m},)")
        radius = self._effective_eps(y, eps)
        feasible_at = self._feasibility_radius(y, float(eps))
        a_norm = estimate_operator_norm(op, cfg.power_iters, cfg.power_seed)
        tau, sigma = self._steps(a_norm ** 2)
        logger.info(f"l1 solve: shape={op.input_shape}, m={op.m}, eps={eps:.3e}, ||A||~{a_norm:.3f}")

        dtype = self._primal_dtype()
        x = np.zeros(op.input_shape, dtype=dtype)
        x_bar = x.copy()
        q = np.zeros(op.m, dtype=np.result_type(y, dtype))

        def step(x, x_bar, state):
            (q,) = state
            q = _ball_dual_prox(q + sigma * op.apply(x_bar), sigma, y, radius)
            x_new = x - tau * op.adjoint(q)
            if cfg.real_images:
                x_new = np.real(x_new)
            return _soft_threshold(x_new, tau), (q,)

        return self._iterate(
            "l1", op, y, radius, feasible_at, x, x_bar, (q,), step,
            objective=lambda z: float(np.sum(np.abs(z))))

    def _iterate(self, label, op, y, radius, feasible_at, x, x_bar, state, step,
                 objective) -> ReconstructionResult:
        cfg = self.config
        history: List[Tuple[float, float]] = []
        best = math.inf
        converged = False
        iterations = 0
        residual = float(np.linalg.norm(op.apply(x) - y))
        best_residual = residual
        improved_at = 0
        for it in range(1, cfg.max_iters + 1):
            x_new, state = step(x, x_bar, state)
            x_bar = 2.0 * x_new - x
            change = float(np.linalg.norm(x_new - x))
            scale = float(np.linalg.norm(x_new))
            x = x_new
            iterations = it

            residual = float(np.linalg.norm(op.apply(x) - y))
            obj = objective(x)
            history.append((obj, residual))
            if residual < best_residual * (1.0 - STAGNATION_DROP):
                best_residual = residual
                improved_at = it

            if cfg.log_every and it % cfg.log_every == 0:
                logger.debug(f"{label} iter {it}: objective={obj:.6e}, residual={residual:.3e}")

            if residual <= feasible_at:
                best = min(best, obj)
                rel_change = change / scale if scale > 0 else change
                if rel_change < cfg.rel_tol:
                    converged = True
                    break
            elif it - improved_at >= STAGNATION_WINDOW and residual > STAGNATION_FACTOR * feasible_at:
                logger.warning(f"{label} solve stagnated at iteration {it} with residual "
                               f"{residual:.3e} far above {feasible_at:.3e}")
                break

        if not converged and iterations == cfg.max_iters:
            logger.warning(f"{label} solve hit max_iters={cfg.max_iters} without converging "
                           f"(residual {residual:.3e})")
        final_obj = objective(x)
        logger.info(f"{label} solve finished: iterations={iterations}, residual={residual:.3e}, "
                    f"objective={final_obj:.6e}, converged={converged}")
        return ReconstructionResult(
            estimate=x,
            iterations=iterations,
            residual=residual,
            objective=final_obj,
            converged=converged,
            eps=radius,
            best_objective=best,
            history=history,
        )


def solve_tv(op: MeasurementOp, y, eps: float, config: Optional[SolverConfig] = None) -> ReconstructionResult:
    return PrimalDualSolver(config).tv(op, y, eps)


def solve_l1_vector(matrix_op, y, eps: float, config: Optional[SolverConfig] = None) -> ReconstructionResult:
    """
    Plain l1 decoder. matrix_op is a MeasurementOp or an m x d array acting on
    length-d vectors; in the array case the estimate is a length-d vector.
    """
    if isinstance(matrix_op, MeasurementOp):
        return PrimalDualSolver(config).l1(matrix_op, y, eps)
    mat = np.asarray(matrix_op)
    if mat.ndim != 2:
        raise InvalidInputError(f"expected a 2-D measurement matrix, got shape {mat.shape}")
    result = PrimalDualSolver(config).l1(DenseOp(mat, (mat.shape[1], 1)), y, eps)
    result.estimate = result.estimate.ravel()
    return result


def solve_l1_haar(op: MeasurementOp, y, eps: float, config: Optional[SolverConfig] = None) -> ReconstructionResult:
    """Haar-l1 decoder: l1 over coefficients c with op(H^-1 c), then Z = H^-1 c."""
    composed = HaarComposedOp(op)
    result = PrimalDualSolver(config).l1(composed, y, eps)
    result.estimate = haar_inverse(result.estimate)
    return result
