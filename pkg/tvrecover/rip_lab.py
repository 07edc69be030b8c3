"""
Empirical restricted-isometry analysis and numerical checks of the recovery
propositions (cone-tube, strong Sobolev, stable gradient recovery).

Certifying RIP is co-NP-hard in general. Exhaustive estimation is limited to
tiny dimensions; sampled estimates are lower bounds and count as evidence,
not proof.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from tvrecover.errors import InvalidInputError, RipBudgetError
from tvrecover.haar import C1
from tvrecover.image_core import (
    best_s_term,
    best_s_term_gradient_error,
    discrete_gradient,
    tv_norm,
)
from tvrecover.operators import CompositeTVOp, MeasurementOp

logger = logging.getLogger(__name__)

EXHAUSTIVE_BUDGET = 10 ** 6
TUBE_IMAGE = 2.0
TUBE_GRADIENT = math.sqrt(8.0)
_CHUNK = 4096
_REL_TOL = 1e-10


@dataclass
class RipEstimate:
    order_s: int
    delta_lower: float
    method: str
    extremes: Tuple[float, float]
    trials: Optional[int] = None
    seed: Optional[int] = None
    supports_checked: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "order_s": self.order_s,
            "delta_lower": self.delta_lower,
            "method": self.method,
            "extremes": list(self.extremes),
            "trials": self.trials,
            "seed": self.seed,
            "supports_checked": self.supports_checked,
        }


@dataclass
class ConeTubeInstance:
    """
    Candidate error D with a support S (flat indices into D), cone
    parameters gamma and sigma, sparsity level k and tube radius eps.
    """
    d_vec: np.ndarray
    support_S: Tuple[int, ...]
    gamma: float
    sigma: float
    eps: float
    k: int = field(default=0)

    def __post_init__(self):
        if self.k == 0:
            self.k = max(len(self.support_S), 1)
        if self.gamma < 1:
            raise InvalidInputError(f"gamma must be at least 1, got {self.gamma}")
        if self.sigma < 0 or self.eps < 0:
            raise InvalidInputError("sigma and eps must be non-negative")

    @classmethod
    def from_error(cls, d_vec, k: int, gamma: float, op: MeasurementOp,
                   tube_multiplier: float = 1.0) -> "ConeTubeInstance":
        """
        Smallest sigma and eps for which D satisfies the cone and tube
        premises, with S the support of the k largest entries of D.
        """
        d_vec = np.asarray(d_vec)
        flat = np.abs(d_vec).ravel()
        support = np.flatnonzero(best_s_term(flat, k))
        on_s = float(np.sum(flat[support]))
        off_s = float(np.sum(flat)) - on_s
        sigma = max(0.0, off_s - gamma * on_s)
        eps = float(np.linalg.norm(op.apply(d_vec.reshape(op.input_shape)))) / tube_multiplier
        return cls(d_vec=d_vec, support_S=tuple(int(i) for i in support), gamma=gamma,
                   sigma=sigma, eps=eps, k=k)


def _rip_from_ratios(lo: float, hi: float) -> float:
    return max(1.0 - lo, hi - 1.0)


def estimate_rip_exhaustive(op: MeasurementOp, s: int, budget: int = EXHAUSTIVE_BUDGET) -> RipEstimate:
    """
    Exact delta_s from the eigenvalues of every s x s principal submatrix of the
    Gram matrix (the squared singular values of the column submatrices).

    Raises:
        RipBudgetError: if C(d, s) exceeds budget
    """
    d = op.d
    if not 1 <= s <= d:
        raise InvalidInputError(f"sparsity order must lie in [1, {d}], got {s}")
    n_supports = math.comb(d, s)
    if n_supports > budget:
        raise RipBudgetError(
            f"exhaustive RIP needs C({d}, {s}) = {n_supports} supports, above the budget of {budget}; "
            f"use estimate_rip_sampled instead")
    mat = op.matrix()
    gram = mat.conj().T @ mat
    lo, hi = math.inf, -math.inf
    combos = itertools.combinations(range(d), s)
    checked = 0
    while True:
        chunk = np.array(list(itertools.islice(combos, _CHUNK)), dtype=np.intp)
        if chunk.size == 0:
            break
        sub = gram[chunk[:, :, None], chunk[:, None, :]]
        eig = np.linalg.eigvalsh(sub)
        lo = min(lo, float(eig[:, 0].min()))
        hi = max(hi, float(eig[:, -1].max()))
        checked += len(chunk)
        logger.debug(f"Exhaustive RIP: {checked}/{n_supports} supports scanned")
    delta = _rip_from_ratios(lo, hi)
    logger.info(f"Exhaustive RIP of order {s} over {checked} supports: delta = {delta:.4f}")
    return RipEstimate(order_s=s, delta_lower=delta, method="exhaustive", extremes=(lo, hi),
                       supports_checked=checked)


def _sparse_unit_vector(d: int, s: int, seed: int, t: int) -> np.ndarray:
    rng = np.random.default_rng([seed, t])
    support = rng.choice(d, size=s, replace=False)
    x = np.zeros(d)
    x[support] = rng.standard_normal(s)
    return x / np.linalg.norm(x)


def estimate_rip_sampled(op: MeasurementOp, s: int, trials: int, seed: int) -> RipEstimate:
    """
    Lower bound on delta_s from random s-sparse unit vectors with Gaussian
    coefficients. Probe t depends only on (seed, t), so adding trials can only
    raise the estimate.
    """
    if trials < 1:
        raise InvalidInputError(f"trials must be at least 1, got {trials}")
    d = op.d
    if not 1 <= s <= d:
        raise InvalidInputError(f"sparsity order must lie in [1, {d}], got {s}")
    lo, hi = math.inf, -math.inf
    for t in range(trials):
        x = _sparse_unit_vector(d, s, seed, t)
        ratio = float(np.linalg.norm(op.apply(x.reshape(op.input_shape))) ** 2)
        lo = min(lo, ratio)
        hi = max(hi, ratio)
    delta = _rip_from_ratios(lo, hi)
    logger.debug(f"Sampled RIP of order {s} over {trials} samples: delta >= {delta:.4f}")
    return RipEstimate(order_s=s, delta_lower=delta, method="sampled", extremes=(lo, hi),
                       trials=trials, seed=seed, supports_checked=trials)


def _le(lhs: float, rhs: float) -> bool:
    return lhs <= rhs * (1.0 + _REL_TOL) + _REL_TOL


def check_cone_tube(instance: ConeTubeInstance, op: MeasurementOp,
                    tube_multiplier: float = 1.0, rip: Optional[RipEstimate] = None) -> Dict[str, Any]:
    """
    Verify the cone and tube premises of an instance, then the explicit
    conclusions

        ||D||_2 <= 8 eps' + 5 sigma / (gamma sqrt k)
        ||D||_1 <= 2 gamma sqrt k (5 eps' + 3 sigma / (gamma sqrt k)) + sigma

    with eps' = tube_multiplier * eps. Premise violations are reported, not
    raised; `passed` is False only when premises hold and a bound fails.
    """
    d_img = np.asarray(instance.d_vec).reshape(op.input_shape)
    flat = np.abs(d_img).ravel()
    gamma, sigma, k = instance.gamma, instance.sigma, instance.k
    mask = np.zeros(flat.size, dtype=bool)
    mask[list(instance.support_S)] = True

    cone_lhs = float(np.sum(flat[~mask]))
    cone_rhs = gamma * float(np.sum(flat[mask])) + sigma
    eps_eff = tube_multiplier * instance.eps
    tube_lhs = float(np.linalg.norm(op.apply(d_img)))
    premises = {
        "support_size": len(instance.support_S) <= k,
        "cone": _le(cone_lhs, cone_rhs),
        "tube": _le(tube_lhs, eps_eff),
    }
    rip_order = math.ceil(5 * k * gamma ** 2)
    if rip is not None:
        premises["rip"] = rip.order_s >= rip_order and rip.delta_lower < 1.0 / 3.0
    premises_hold = all(premises.values())

    scale = sigma / (gamma * math.sqrt(k))
    l2_lhs = float(np.linalg.norm(d_img))
    l2_rhs = 8.0 * eps_eff + 5.0 * scale
    l1_lhs = float(np.sum(flat))
    l1_rhs = 2.0 * gamma * math.sqrt(k) * (5.0 * eps_eff + 3.0 * scale) + sigma
    bounds_hold = _le(l2_lhs, l2_rhs) and _le(l1_lhs, l1_rhs)

    if not premises_hold:
        failed = [name for name, ok in premises.items() if not ok]
        logger.warning(f"Cone-tube premises violated: {', '.join(failed)}")
    return {
        "k": k,
        "gamma": gamma,
        "sigma": sigma,
        "eps": instance.eps,
        "tube_multiplier": tube_multiplier,
        "rip_order_required": rip_order,
        "rip_delta": rip.delta_lower if rip is not None else None,
        "premises": premises,
        "premises_hold": premises_hold,
        "cone": {"lhs": cone_lhs, "rhs": cone_rhs},
        "tube": {"lhs": tube_lhs, "rhs": eps_eff},
        "l2_bound": {"lhs": l2_lhs, "rhs": l2_rhs},
        "l1_bound": {"lhs": l1_lhs, "rhs": l1_rhs},
        "bounds_hold": bounds_hold,
        "passed": (not premises_hold) or bounds_hold,
    }


def near_null_projection(op: MeasurementOp, v, maxiter: Optional[int] = None) -> np.ndarray:
    """
    v - op*(op op*)^-1 op(v), solved with conjugate gradients on the m x m
    system. Requires op op* to be invertible (m <= d, full row rank).
    """
    v = np.asarray(v)
    y = op.apply(v)
    dtype = np.result_type(y.dtype, np.float64)

    def matvec(w):
        return op.apply(op.adjoint(np.asarray(w).reshape(op.m)))

    gram = LinearOperator((op.m, op.m), matvec=matvec, dtype=dtype)
    w, info = cg(gram, y, maxiter=maxiter or 10 * op.m)
    if info != 0:
        logger.warning(f"Conjugate gradients stopped without converging (info={info})")
    out = v - op.adjoint(w)
    if not np.iscomplexobj(v) and np.iscomplexobj(out):
        out = out.real
    return out


def generate_cone_tube_instances(op: MeasurementOp, k: int, gamma: float, count: int,
                                 seed: int) -> List[ConeTubeInstance]:
    """
    Instances that satisfy the premises by construction: half are a k-sparse
    dominant part plus a small dense tail, half are near-null-space vectors
    with k spikes added (only when op has a null space). sigma and eps are
    the tightest admissible values.
    """
    instances = []
    d = op.d
    has_null_space = op.m < d
    for t in range(count):
        rng = np.random.default_rng([seed, t])
        if t % 2 == 0 or not has_null_space:
            vec = np.zeros(d)
            support = rng.choice(d, size=k, replace=False)
            vec[support] = rng.standard_normal(k) * 5.0
            vec += rng.standard_normal(d) * rng.uniform(0.0, 0.2)
        else:
            base = near_null_projection(op, rng.standard_normal(op.input_shape)).ravel()
            vec = base.copy()
            support = rng.choice(d, size=k, replace=False)
            vec[support] += rng.standard_normal(k) * rng.uniform(0.0, 3.0)
        instances.append(ConeTubeInstance.from_error(vec.reshape(op.input_shape), k, gamma, op))
    return instances


def strong_sobolev_constant(delta: float, n: int, s: int) -> float:
    """
    Constant of the strengthened Sobolev inequality assembled from its proof:

        max(1 / (1 - delta), C1 * ((1 + delta) / (1 - delta) + 1 / min(1, log(N^2 / s))))
    """
    if not 0 <= delta < 1:
        raise InvalidInputError(f"RIP level must lie in [0, 1), got {delta}")
    size = 2 ** n
    if not 1 <= s < size * size:
        raise InvalidInputError(f"s must lie in [1, N^2), got {s}")
    log_term = math.log(size * size / s)
    return max(1.0 / (1.0 - delta), C1 * ((1.0 + delta) / (1.0 - delta) + 1.0 / min(1.0, log_term)))


def check_strong_sobolev(d_img, b: MeasurementOp, s: int, delta: float = 0.5,
                         rip: Optional[RipEstimate] = None) -> Dict[str, Any]:
    """
    Ratio ||D||_2 / ((||D||_TV / sqrt s) log(N^2 / s) + eps) with eps = ||b(D)||_2,
    checked against strong_sobolev_constant. When an RIP estimate of b
    composed with the inverse Haar transform is given, its level replaces
    delta and the order-2s premise is recorded.
    """
    d_img = np.asarray(d_img)
    size = d_img.shape[0]
    n = size.bit_length() - 1
    if rip is not None:
        delta = rip.delta_lower
    premise = rip is None or (rip.order_s >= 2 * s and rip.delta_lower < 1.0)
    eps = float(np.linalg.norm(b.apply(d_img)))
    tv = tv_norm(d_img)
    log_term = math.log(size * size / s)
    denominator = tv / math.sqrt(s) * log_term + eps
    norm = float(np.linalg.norm(d_img))
    if norm == 0.0:
        ratio = 0.0
    elif denominator == 0.0:
        ratio = math.inf
    else:
        ratio = norm / denominator
    constant = strong_sobolev_constant(min(delta, 1.0 - 1e-12), n, s)
    if not premise:
        logger.warning(f"Strong Sobolev premise violated: delta = {delta:.4f} at order {rip.order_s}")
    return {
        "s": s,
        "n": size,
        "eps": eps,
        "tv": tv,
        "norm": norm,
        "log_term": log_term,
        "ratio": ratio,
        "constant": constant,
        "delta": delta,
        "premise_holds": premise,
        "passed": (not premise) or ratio <= constant,
    }


def check_gradient_recovery(x_true, x_hat, op: CompositeTVOp, eps: float, s: int,
                            tube_slack: float = 0.0) -> Dict[str, Any]:
    """
    Check the stable-gradient chain on an actual reconstruction with D = X - X_hat:

    - cone: ||(grad D)_{S^c}||_1 <= ||(grad D)_S||_1 + 2 tail, S the top-s support of grad X
    - image tube: ||M(D)||_2 <= 2 eps
    - gradient tube: ||[A A'](L)||_2^2 <= 2 ||M(D)||_2^2 <= 8 eps^2

    tube_slack is an absolute allowance added to the image tube radius for
    reconstructions that are feasible only to solver tolerance.
    """
    x_true = np.asarray(x_true)
    diff = x_true - np.asarray(x_hat)
    grad_true = discrete_gradient(x_true).as_array().ravel()
    grad_diff_field = discrete_gradient(diff)
    grad_diff = grad_diff_field.as_array().ravel()
    support = np.flatnonzero(best_s_term(np.abs(grad_true), s)) if s > 0 else np.array([], dtype=int)
    mask = np.zeros(grad_diff.size, dtype=bool)
    mask[support] = True
    tail = best_s_term_gradient_error(x_true, s)

    cone_lhs = float(np.sum(np.abs(grad_diff[~mask])))
    cone_rhs = float(np.sum(np.abs(grad_diff[mask]))) + 2.0 * tail
    md = float(np.linalg.norm(op.apply(diff)))
    radius = TUBE_IMAGE * eps + tube_slack
    grad_meas = float(np.linalg.norm(op.gradient_measurements(diff)) ** 2)
    gradient_radius = (TUBE_GRADIENT / TUBE_IMAGE * radius) ** 2
    checks = {
        "cone": _le(cone_lhs, cone_rhs),
        "image_tube": _le(md, radius),
        "gradient_tube": _le(grad_meas, 2.0 * md ** 2) and _le(2.0 * md ** 2, gradient_radius),
    }
    return {
        "s": s,
        "eps": eps,
        "tail": tail,
        "cone": {"lhs": cone_lhs, "rhs": cone_rhs},
        "image_tube": {"lhs": md, "rhs": radius},
        "gradient_tube": {"lhs": grad_meas, "mid": 2.0 * md ** 2, "rhs": gradient_radius},
        "gradient_error": grad_diff_field.l2_norm(),
        "tv_error": tv_norm(diff),
        "l2_error": float(np.linalg.norm(diff)),
        "checks": checks,
        "passed": all(checks.values()),
    }
