"""Desk-scale reconstruction experiments. All tests here are slow."""
import math

import numpy as np
import pytest

from tvrecover.experiments import ExperimentConfig, run_experiment
from tvrecover.image_core import discrete_gradient, tv_norm
from tvrecover.operators import NoiseModel, add_noise, gaussian_composite_op
from tvrecover.phantoms import synthetic_gradient_sparse
from tvrecover.rip_lab import check_gradient_recovery
from tvrecover.solver import SolverConfig, solve_tv

pytestmark = pytest.mark.slow

N, RECTANGLES, M1, M2 = 32, 10, 150, 300
SOLVER = SolverConfig(max_iters=8000)


def _recover(seed, relative_noise=0.0):
    truth, support = synthetic_gradient_sparse(N, RECTANGLES, seed)
    op = gaussian_composite_op(N, M1, M2, seed)
    y_clean = op.apply(truth)
    if relative_noise:
        sigma = relative_noise * float(np.linalg.norm(y_clean)) / math.sqrt(op.m)
        y, eps = add_noise(y_clean, NoiseModel(kind="gaussian", sigma=sigma, seed=seed))
    else:
        y, eps = y_clean, 0.0
    return truth, support, op, y, eps, solve_tv(op, y, eps, SOLVER)


def _rel_error(truth, estimate):
    return float(np.linalg.norm(estimate - truth) / np.linalg.norm(truth))


def test_noiseless_composite_solves_converge():
    for seed in range(3):
        truth, _, _, _, _, result = _recover(seed)
        assert result.converged, seed
        assert _rel_error(truth, result.estimate) <= 1e-3, seed


def test_noiseless_gradient_sparse_recovery():
    errors = [_rel_error(truth, result.estimate)
              for truth, _, _, _, _, result in (_recover(seed) for seed in range(20))]
    assert sum(e <= 1e-3 for e in errors) >= 18, errors


def test_error_scales_with_noise_level():
    ratios = []
    for level in (1e-3, 1e-2, 1e-1):
        truth, support, op, y, eps, result = _recover(0, level)
        error = float(np.linalg.norm(result.estimate - truth))
        ratios.append(error / eps)

        grad_error = (discrete_gradient(truth) - discrete_gradient(result.estimate)).l2_norm()
        assert grad_error <= 50 * eps
        assert tv_norm(truth - result.estimate) <= 50 * math.sqrt(support) * eps

        slack = max(0.0, result.residual - eps) + 1e-6 * float(np.linalg.norm(y))
        report = check_gradient_recovery(truth, result.estimate, op, eps, support, tube_slack=slack)
        assert report["checks"]["image_tube"]
        assert report["checks"]["gradient_tube"]
    assert max(ratios) / min(ratios) < 3.0, ratios


def test_error_reaches_solver_floor_as_noise_vanishes():
    truth, _, _, _, _, noisy = _recover(0, 1e-3)
    _, _, _, _, _, quiet = _recover(0, 1e-7)
    assert _rel_error(truth, quiet.estimate) <= 1e-3
    assert _rel_error(truth, quiet.estimate) < _rel_error(truth, noisy.estimate)


@pytest.mark.parametrize("noise", [
    {"kind": "none"},
    {"kind": "gaussian", "relative": 0.05, "seed": 1},
    {"kind": "quantization", "relative": 0.05},
], ids=lambda noise: noise["kind"])
def test_tv_beats_haar_l1_on_phantom(settings, noise):
    config = ExperimentConfig.from_dict({
        "image": {"kind": "phantom", "n": 64},
        "operator": {"kind": "fourier_signed", "fraction": 0.2, "seed": 0},
        "noise": noise,
        "solver": {"max_iters": 5000},
        "output_dir": f"phantom64_{noise['kind']}",
    })
    tv_row, haar_row = run_experiment(config, settings)
    assert tv_row.rel_error < haar_row.rel_error
    if noise["kind"] == "none":
        assert tv_row.rel_error <= 0.05
