import logging
import math

import numpy as np
import pytest
from scipy.optimize import linprog

from tvrecover.errors import InvalidInputError
from tvrecover.haar import haar_inverse
from tvrecover.image_core import best_s_term, discrete_gradient, tv_norm
from tvrecover.operators import DenseOp, fourier_signed_op, gaussian_op, identity_op
from tvrecover.phantoms import synthetic_gradient_sparse
from tvrecover.solver import (
    PrimalDualSolver,
    ReconstructionResult,
    SolverConfig,
    _ball_dual_prox,
    _clip_unit,
    _project_ball,
    _soft_threshold,
    solve_l1_haar,
    solve_l1_vector,
    solve_tv,
)


def test_config_defaults_and_round_trip():
    cfg = SolverConfig()
    assert cfg.max_iters == 2000
    assert cfg.rel_tol == 1e-6
    assert cfg.feas_slack == 1e-4
    assert SolverConfig.from_dict(cfg.to_dict()) == cfg
    assert SolverConfig.from_dict(None) == cfg


@pytest.mark.parametrize("bad", [
    {"max_iters": 0},
    {"rel_tol": 0.0},
    {"feas_floor": -1.0},
    {"step_ratio": 0.0},
    {"tv_mode": "manhattan"},
    {"tolerance": 1e-3},
])
def test_config_validation(bad):
    with pytest.raises(InvalidInputError):
        SolverConfig.from_dict(bad)


def test_result_serialization():
    result = ReconstructionResult(estimate=np.zeros((2, 2)), iterations=3, residual=0.1, objective=1.0,
                                  converged=True, eps=0.2, best_objective=1.0, history=[(1.0, 0.1)])
    assert "history" not in result.to_dict()
    assert result.to_dict(include_history=True)["history"] == [[1.0, 0.1]]


def test_proximal_helpers():
    center = np.array([1.0, 0.0])
    assert np.allclose(_project_ball(np.array([4.0, 4.0]), center, 5.0), [4.0, 4.0])
    assert np.allclose(_project_ball(np.array([7.0, 8.0]), center, 5.0), [4.0, 4.0])
    assert np.allclose(_clip_unit(np.array([0.5, -3.0, 2j])), [0.5, -1.0, 1j])
    assert np.allclose(_soft_threshold(np.array([3.0, -0.5, -2.0]), 1.0), [2.0, 0.0, -1.0])
    # Moreau: u = prox_{sigma f*}(u) + sigma prox_{f/sigma}(u / sigma)
    u = np.array([3.0, -1.0])
    y = np.array([1.0, 1.0])
    dual = _ball_dual_prox(u, 0.5, y, 1.0)
    assert np.allclose(dual + 0.5 * _project_ball(u / 0.5, y, 1.0), u)


def test_zero_measurements_converge_immediately():
    op = gaussian_op(10, 4, 4, seed=0)
    result = solve_tv(op, np.zeros(10), 0.0)
    assert result.converged
    assert result.iterations == 1
    assert np.all(result.estimate == 0)


def test_large_eps_gives_zero_image(rng):
    op = fourier_signed_op(8, 4, seed=0)
    y = op.apply(rng.standard_normal((4, 4)))
    result = solve_tv(op, y, 2.0 * float(np.linalg.norm(y)))
    assert result.converged
    assert result.objective == 0.0
    assert not np.iscomplexobj(result.estimate)


def test_tv_denoising_is_feasible_and_not_worse_than_truth():
    truth, _ = synthetic_gradient_sparse(8, 3, seed=4)
    noise = np.random.default_rng(0).standard_normal((8, 8)) * 0.05
    op = identity_op(8, 8)
    y = op.apply(truth + noise)
    eps = float(np.linalg.norm(noise)) * 1.05
    result = solve_tv(op, y, eps, SolverConfig(max_iters=5000))
    assert result.residual <= eps * 1.01
    assert result.objective <= tv_norm(truth) * 1.01
    assert len(result.history) == result.iterations


def test_isotropic_mode_runs():
    truth, _ = synthetic_gradient_sparse(8, 2, seed=1)
    op = identity_op(8, 8)
    result = solve_tv(op, op.apply(truth), 1.0, SolverConfig(tv_mode="isotropic", max_iters=3000))
    assert result.residual <= 1.01
    assert result.objective <= tv_norm(truth, "isotropic") * 1.01


def test_max_iters_warning(rng, caplog):
    op = identity_op(4, 4)
    with caplog.at_level(logging.WARNING, logger="tvrecover.solver"):
        result = solve_tv(op, op.apply(rng.standard_normal((4, 4))), 0.0, SolverConfig(max_iters=1))
    assert result.iterations == 1
    assert not result.converged
    assert "max_iters" in caplog.text


def test_zero_eps_uses_tiny_ball(rng):
    y = rng.standard_normal(16)
    solver = PrimalDualSolver()
    assert solver._effective_eps(y, 0.0) == pytest.approx(1e-12 * np.linalg.norm(y))
    assert solver._feasibility_radius(y, 0.0) == pytest.approx(1e-6 * np.linalg.norm(y))
    with pytest.raises(InvalidInputError):
        solver._effective_eps(y, -1.0)


def test_input_validation():
    with pytest.raises(InvalidInputError):
        solve_tv(gaussian_op(5, 2, 3, seed=0), np.zeros(5), 0.1)
    with pytest.raises(InvalidInputError):
        solve_tv(gaussian_op(5, 4, 4, seed=0), np.zeros(6), 0.1)
    with pytest.raises(InvalidInputError):
        solve_l1_vector(np.zeros(5), np.zeros(5), 0.1)


def test_l1_haar_large_eps(rng):
    op = identity_op(8, 8)
    y = op.apply(rng.standard_normal((8, 8)))
    result = solve_l1_haar(op, y, 2.0 * float(np.linalg.norm(y)))
    assert result.estimate.shape == (8, 8)
    assert np.all(result.estimate == 0)


PRECISE = SolverConfig(max_iters=20000, rel_tol=1e-10)


def _one_sparse(d, amplitude, seed):
    x = np.zeros(d)
    x[np.random.default_rng(seed).integers(d)] = amplitude
    return x


def test_infeasible_run_does_not_stop_on_small_change(caplog):
    op = gaussian_op(12, 4, 4, seed=3)
    truth, _ = synthetic_gradient_sparse(4, 1, seed=2)
    with caplog.at_level(logging.WARNING, logger="tvrecover.solver"):
        result = solve_tv(op, op.apply(truth), 0.0, SolverConfig(max_iters=20000))
    assert result.converged
    assert result.residual <= 1e-6 * np.linalg.norm(op.apply(truth))
    assert "stagnated" not in caplog.text


def test_inconsistent_measurements_are_reported(rng, caplog):
    op = gaussian_op(40, 4, 4, seed=1)
    y = rng.standard_normal(40)
    with caplog.at_level(logging.WARNING, logger="tvrecover.solver"):
        result = solve_tv(op, y, 0.0, SolverConfig(max_iters=20000))
    assert not result.converged
    assert result.residual > 10 * 1e-6 * np.linalg.norm(y)
    assert any(r.levelno == logging.WARNING for r in caplog.records)


@pytest.mark.parametrize("amplitude", [2.5, 25.0])
def test_l1_vector_recovers_one_sparse_vector(amplitude):
    d = 256
    m = math.ceil(8 * math.log(d))
    mat = gaussian_op(m, d, 1, seed=11).matrix()
    x = _one_sparse(d, amplitude, seed=4)
    result = solve_l1_vector(mat, mat @ x, 0.0, PRECISE)
    assert result.iterations > 1
    assert result.converged
    assert np.linalg.norm(result.estimate - x) <= 1e-5 * np.linalg.norm(x)


def test_l1_zero_measurements():
    mat = gaussian_op(10, 20, 1, seed=0).matrix()
    result = solve_l1_vector(mat, np.zeros(10), 0.0)
    assert result.converged
    assert np.all(result.estimate == 0)


def test_l1_haar_recovers_single_wavelet():
    n = 16
    coeffs = np.zeros((n, n))
    coeffs[3, 5] = 1.0
    truth = haar_inverse(coeffs)
    op = gaussian_op(math.ceil(6 * math.log(n * n)), n, n, seed=2)
    result = solve_l1_haar(op, op.apply(truth), 0.0, PRECISE)
    assert result.iterations > 1
    assert np.linalg.norm(result.estimate - truth) <= 1e-4 * np.linalg.norm(truth)


def test_l1_haar_recovers_constant_image():
    truth = np.full((8, 8), 0.3)
    op = gaussian_op(20, 8, 8, seed=6)
    result = solve_l1_haar(op, op.apply(truth), 0.0, PRECISE)
    assert np.linalg.norm(result.estimate - truth) <= 1e-4 * np.linalg.norm(truth)


def test_tv_recovers_constant_image_with_mean_row():
    n = 8
    mean_row = np.full((1, n * n), 1.0 / n)
    op = DenseOp(np.vstack([gaussian_op(20, n, n, seed=9).matrix(), mean_row]), (n, n))
    truth = np.full((n, n), 0.7)
    result = solve_tv(op, op.apply(truth), 0.0, PRECISE)
    assert np.linalg.norm(result.estimate - truth) <= 1e-4 * np.linalg.norm(truth)


@pytest.mark.parametrize("alpha", [0.25, 4.0])
def test_tv_is_scale_equivariant(alpha):
    truth, _ = synthetic_gradient_sparse(8, 2, seed=8)
    op = gaussian_op(48, 8, 8, seed=5)
    y = op.apply(truth)
    base = solve_tv(op, y, 0.0, PRECISE)
    scaled = solve_tv(op, alpha * y, 0.0, PRECISE)
    assert np.linalg.norm(scaled.estimate - alpha * base.estimate) <= 1e-3 * alpha * np.linalg.norm(base.estimate)


def _tv_linear_program(mat, y):
    """min ||grad z||_1 s.t. mat z = y as an LP over (z, t)."""
    n = int(round(math.sqrt(mat.shape[1])))
    d = n * n
    grad = np.column_stack([discrete_gradient(e.reshape(n, n)).as_array().ravel() for e in np.eye(d)])
    rows = grad.shape[0]
    cost = np.concatenate([np.zeros(d), np.ones(rows)])
    a_ub = np.block([[grad, -np.eye(rows)], [-grad, -np.eye(rows)]])
    a_eq = np.hstack([mat, np.zeros((mat.shape[0], rows))])
    bounds = [(None, None)] * d + [(0, None)] * rows
    res = linprog(cost, A_ub=a_ub, b_ub=np.zeros(2 * rows), A_eq=a_eq, b_eq=y, bounds=bounds, method="highs")
    assert res.status == 0
    return res.fun


@pytest.mark.slow
def test_tv_objective_matches_linear_program():
    for seed in range(20):
        op = gaussian_op(8, 4, 4, seed=seed)
        x = np.random.default_rng(100 + seed).standard_normal((4, 4))
        y = op.apply(x)
        optimum = _tv_linear_program(op.matrix(), y)
        result = solve_tv(op, y, 0.0, SolverConfig(max_iters=50000, rel_tol=1e-10))
        assert abs(result.objective - optimum) <= 1e-3 * max(1.0, optimum), seed


@pytest.mark.slow
def test_l1_error_bound_constant():
    d, s, m = 256, 5, 128
    for seed in range(5):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(d) * 0.01
        x[rng.choice(d, s, replace=False)] += rng.standard_normal(s) * 5.0
        mat = gaussian_op(m, d, 1, seed=50 + seed).matrix()
        noise = rng.standard_normal(m) * 0.01
        eps = float(np.linalg.norm(noise))
        result = solve_l1_vector(mat, mat @ x + noise, eps, SolverConfig(max_iters=20000))
        tail = float(np.sum(np.abs(x - best_s_term(x, s))))
        bound = tail / math.sqrt(s) + eps
        assert np.linalg.norm(result.estimate - x) <= 20 * bound, seed


@pytest.mark.slow
def test_l1_vector_recovers_sparse_vector():
    rng = np.random.default_rng(7)
    d, m, s = 100, 50, 5
    mat = rng.standard_normal((m, d)) / math.sqrt(m)
    x = np.zeros(d)
    x[rng.choice(d, s, replace=False)] = rng.standard_normal(s) * 3
    result = solve_l1_vector(mat, mat @ x, 0.0, PRECISE)
    assert result.estimate.shape == (d,)
    assert np.linalg.norm(result.estimate - x) <= 1e-4 * np.linalg.norm(x)


@pytest.mark.slow
def test_tv_recovers_gradient_sparse_image_from_fourier():
    truth, _ = synthetic_gradient_sparse(16, 4, seed=3)
    op = fourier_signed_op(128, 16, seed=2)
    result = solve_tv(op, op.apply(truth), 0.0, SolverConfig(max_iters=10000))
    assert np.linalg.norm(result.estimate - truth) <= 0.1 * np.linalg.norm(truth)


@pytest.mark.slow
def test_l1_haar_recovers_haar_sparse_image():
    rng = np.random.default_rng(5)
    coeffs = np.zeros((8, 8))
    coeffs.flat[rng.choice(64, 4, replace=False)] = rng.standard_normal(4) * 2
    truth = haar_inverse(coeffs)
    op = gaussian_op(40, 8, 8, seed=1)
    result = solve_l1_haar(op, op.apply(truth), 0.0, PRECISE)
    assert np.linalg.norm(result.estimate - truth) <= 1e-4 * np.linalg.norm(truth)
