"""
Desk-scale reconstruction experiments: build an image and an operator from a
JSON config, measure, corrupt, decode with each requested decoder and write
metrics plus images.
"""
import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from tvrecover.config import RecoveryConfig
from tvrecover.errors import InvalidInputError
from tvrecover.image_core import best_s_term_gradient_error, discrete_gradient, tv_norm
from tvrecover.image_io import read_pgm, write_pgm
from tvrecover.operators import (
    MeasurementOp,
    NoiseModel,
    add_noise,
    fourier_plain_op,
    fourier_signed_op,
    gaussian_composite_op,
    gaussian_op,
)
from tvrecover.phantoms import phantom, synthetic_gradient_sparse
from tvrecover.solver import ReconstructionResult, SolverConfig, solve_l1_haar, solve_tv

logger = logging.getLogger(__name__)

CSV_SCHEMA = "tvrecover-metrics/1"
CSV_FIELDS = ["decoder", "status", "rel_error", "grad_error", "tv_error", "residual", "eps",
              "iterations", "objective", "s", "tail"]
DECODERS = ("tv", "haar_l1")
IMAGE_KINDS = ("phantom", "file", "synthetic_gradient_sparse")
OPERATOR_KINDS = ("fourier_signed", "fourier_plain", "gaussian", "composite_tv")


@dataclass
class ExperimentConfig:
    image: Dict[str, Any]
    operator: Dict[str, Any]
    noise: Dict[str, Any] = field(default_factory=lambda: {"kind": "none"})
    decoders: List[str] = field(default_factory=lambda: list(DECODERS))
    solver: Dict[str, Any] = field(default_factory=dict)
    solver_overrides: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    output_dir: str = "experiment"
    tail_s: Optional[int] = None
    name: str = "experiment"

    def __post_init__(self):
        kind = self.image.get("kind")
        if kind not in IMAGE_KINDS:
            raise InvalidInputError(f"unknown image source {kind!r}; expected one of {IMAGE_KINDS}")
        if kind == "synthetic_gradient_sparse" and "seed" not in self.image:
            raise InvalidInputError("synthetic images need an explicit seed")
        if kind == "file" and "path" not in self.image:
            raise InvalidInputError("file image sources need a path")

        op_kind = self.operator.get("kind")
        if op_kind not in OPERATOR_KINDS:
            raise InvalidInputError(f"unknown operator kind {op_kind!r}; expected one of {OPERATOR_KINDS}")
        if "seed" not in self.operator:
            raise InvalidInputError("operator specs need an explicit seed")
        fraction = self.operator.get("fraction")
        if fraction is not None and not 0 < fraction <= 1:
            raise InvalidInputError(f"sampling fraction must lie in (0, 1], got {fraction}")
        if op_kind == "composite_tv" and not {"m1", "m2"} <= set(self.operator):
            raise InvalidInputError("composite_tv operators need m1 and m2")
        if op_kind != "composite_tv" and fraction is None and "m" not in self.operator:
            raise InvalidInputError(f"{op_kind} operators need m or fraction")

        noise_kind = self.noise.get("kind", "none")
        if noise_kind not in ("none", "gaussian", "quantization"):
            raise InvalidInputError(f"unknown noise kind {noise_kind!r}")
        if noise_kind == "gaussian" and "seed" not in self.noise:
            raise InvalidInputError("gaussian noise needs an explicit seed")
        if noise_kind != "none" and not ({"sigma", "delta", "relative"} & set(self.noise)):
            raise InvalidInputError(f"{noise_kind} noise needs sigma, delta or relative")

        unknown = [d for d in self.decoders if d not in DECODERS]
        if unknown or not self.decoders:
            raise InvalidInputError(f"decoders must be a non-empty subset of {DECODERS}, got {self.decoders}")
        for decoder in self.decoders:
            self.solver_config(decoder)

    def solver_config(self, decoder: str) -> SolverConfig:
        settings = dict(self.solver)
        settings.update(self.solver_overrides.get(decoder, {}))
        return SolverConfig.from_dict(settings)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        if "image" not in data or "operator" not in data:
            raise InvalidInputError("experiment config needs 'image' and 'operator' sections")
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidInputError(f"unknown experiment settings: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ExperimentConfig":
        try:
            with open(path) as f:
                data = json.load(f)
        except FileNotFoundError as e:
            raise InvalidInputError(f"experiment config not found: {path}") from e
        except json.JSONDecodeError as e:
            raise InvalidInputError(f"experiment config {path} is not valid JSON: {e}") from e
        return cls.from_dict(data)


@dataclass
class MetricsRow:
    decoder: str
    status: str
    rel_error: float
    grad_error: float
    tv_error: float
    residual: float
    eps: float
    iterations: int
    objective: float
    s: int
    tail: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def csv_values(self) -> List[str]:
        return [repr(v) if isinstance(v, float) else str(v) for v in (getattr(self, f) for f in CSV_FIELDS)]


def build_image(section: Dict[str, Any], settings: RecoveryConfig) -> np.ndarray:
    kind = section["kind"]
    if kind == "phantom":
        return phantom(int(section.get("n", settings.default_n)))
    if kind == "synthetic_gradient_sparse":
        image, support = synthetic_gradient_sparse(int(section.get("n", settings.default_n)),
                                                   int(section["s"]), int(section["seed"]))
        logger.info(f"Synthetic image with gradient support {support}")
        return image
    return read_pgm(section["path"])


def measurement_count(section: Dict[str, Any], n: int) -> int:
    if "m" in section:
        return int(section["m"])
    return int(math.floor(section["fraction"] * n * n))


def build_operator(section: Dict[str, Any], n: int) -> MeasurementOp:
    kind, seed = section["kind"], int(section["seed"])
    if kind == "composite_tv":
        return gaussian_composite_op(n, int(section["m1"]), int(section["m2"]), seed)
    m = measurement_count(section, n)
    if kind == "fourier_signed":
        return fourier_signed_op(m, n, seed)
    if kind == "fourier_plain":
        return fourier_plain_op(m, n, seed)
    return gaussian_op(m, n, n, seed)


def build_noise(section: Dict[str, Any], y: np.ndarray) -> NoiseModel:
    """
    Resolve a noise section against the clean measurements. Relative gaussian
    noise uses sigma = r ||y|| / sqrt(m), so eps is close to r ||y||;
    relative quantization uses delta = r max |y_i|.
    """
    kind = section.get("kind", "none")
    seed = int(section.get("seed", 0))
    if kind == "none":
        return NoiseModel(kind="none", seed=seed)
    if kind == "gaussian":
        sigma = section.get("sigma")
        if sigma is None:
            sigma = section["relative"] * float(np.linalg.norm(y)) / math.sqrt(y.size)
        return NoiseModel(kind="gaussian", sigma=float(sigma), seed=seed)
    delta = section.get("delta")
    if delta is None:
        delta = section["relative"] * float(np.max(np.abs(y)))
    return NoiseModel(kind="quantization", delta=float(delta), seed=seed)


def _decode(decoder: str, op: MeasurementOp, y: np.ndarray, eps: float, config: SolverConfig) -> ReconstructionResult:
    if decoder == "tv":
        return solve_tv(op, y, eps, config)
    return solve_l1_haar(op, y, eps, config)


def compute_metrics(decoder: str, truth: np.ndarray, result: ReconstructionResult, eps: float, s: int) -> MetricsRow:
    estimate = np.real(result.estimate)
    diff = truth - estimate
    return MetricsRow(
        decoder=decoder,
        status="converged" if result.converged else "not_converged",
        rel_error=float(np.linalg.norm(diff) / np.linalg.norm(truth)),
        grad_error=discrete_gradient(diff).l2_norm(),
        tv_error=tv_norm(diff),
        residual=result.residual,
        eps=eps,
        iterations=result.iterations,
        objective=result.objective,
        s=s,
        tail=best_s_term_gradient_error(truth, s),
    )


def write_metrics_csv(path: Path, rows: List[MetricsRow]) -> None:
    with open(path, "w", newline="") as f:
        f.write(f"# schema: {CSV_SCHEMA}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for row in rows:
            writer.writerow(row.csv_values())


def read_metrics_csv(path: Union[str, Path]) -> List[Dict[str, str]]:
    with open(path, newline="") as f:
        schema = f.readline().strip()
        if schema != f"# schema: {CSV_SCHEMA}":
            raise InvalidInputError(f"{path} does not carry the {CSV_SCHEMA} schema line")
        return list(csv.DictReader(f))


def _write_json(path: Path, payload: Dict[str, Any]) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, sort_keys=True, indent=2)
        f.write("\n")


def run_experiment(config: ExperimentConfig, settings: Optional[RecoveryConfig] = None) -> List[MetricsRow]:
    """
    Run every decoder of an experiment in config order.

    Writes metrics.csv, <decoder>.pgm, truth.pgm (each with a sidecar),
    operator.json and run.json under the resolved output directory. A decoder
    that fails is recorded with status 'failed' and the run continues.

    Returns:
        List[MetricsRow]: one row per decoder
    """
    settings = settings or RecoveryConfig()
    out_dir = settings.resolve_output(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    logger.info(f"Starting experiment '{config.name}' in {out_dir}")

    truth = build_image(config.image, settings)
    n = truth.shape[0]
    op = build_operator(config.operator, n)
    descriptor = op.to_dict()
    logger.info(f"Operator {descriptor['kind']} with m={op.m}, guarantee={descriptor['guarantee']}")
    _write_json(out_dir / "operator.json", descriptor)

    y_clean = op.apply(truth)
    noise = build_noise(config.noise, y_clean)
    y, eps = add_noise(y_clean, noise)
    logger.info(f"Measured {op.m} values, noise {noise.kind}, eps={eps:.4e}")
    write_pgm(out_dir / "truth.pgm", truth)

    s = config.tail_s
    if s is None:
        s = int(np.count_nonzero(discrete_gradient(truth).as_array()))

    rows: List[MetricsRow] = []
    cells: Dict[str, Dict[str, Any]] = {}
    for decoder in config.decoders:
        start = time.perf_counter()
        try:
            result = _decode(decoder, op, y, eps, config.solver_config(decoder))
        except (ArithmeticError, np.linalg.LinAlgError, InvalidInputError) as e:
            logger.error(f"Decoder {decoder} failed: {str(e)}")
            nan = float("nan")
            rows.append(MetricsRow(decoder, "failed", nan, nan, nan, nan, eps, 0, nan, s, nan))
            cells[decoder] = {"status": "failed", "error": str(e),
                              "wall_time": time.perf_counter() - start}
            continue
        wall = time.perf_counter() - start
        row = compute_metrics(decoder, truth, result, eps, s)
        rows.append(row)
        write_pgm(out_dir / f"{decoder}.pgm", np.real(result.estimate))
        cells[decoder] = {"status": row.status, "iterations": result.iterations, "wall_time": wall}
        logger.info(f"Decoder {decoder}: rel_error={row.rel_error:.4e}, status={row.status}, "
                    f"{wall:.1f}s")

    write_metrics_csv(out_dir / "metrics.csv", rows)
    _write_json(out_dir / "run.json", {
        "config": config.to_dict(),
        "eps": eps,
        "noise": noise.to_dict(),
        "cells": cells,
    })
    logger.info(f"Experiment '{config.name}' finished")
    return rows
