import argparse
import json
import logging
import sys
from typing import List, Optional

from tvrecover.config import RecoveryConfig
from tvrecover.errors import InvalidInputError, RipBudgetError
from tvrecover.experiments import ExperimentConfig, run_experiment
from tvrecover.image_io import write_pgm
from tvrecover.operators import (
    MeasurementOp,
    compose_with_inverse_haar,
    fourier_plain_op,
    fourier_signed_op,
    gaussian_op,
    identity_op,
)
from tvrecover.phantoms import phantom
from tvrecover.rip_lab import estimate_rip_exhaustive, estimate_rip_sampled
from tvrecover.suites import SUITES, run_property_suite

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
RIP_KINDS = ("identity", "gaussian", "fourier_signed", "fourier_plain")

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="recover",
                                     description="Total-variation recovery toolkit for compressed-sensing images")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run a reconstruction experiment from a JSON config")
    run.add_argument("config", type=str, help="Path to the experiment config")

    suite = sub.add_parser("suite", help="Run a property suite")
    suite.add_argument("name", choices=sorted(SUITES), help="Suite id")
    suite.add_argument("--n", type=int, help="Image side")
    suite.add_argument("--seed", type=int, help="Seed (defaults to RECOVER_SEED)")
    suite.add_argument("--trials", type=int, help="Number of random instances")

    ph = sub.add_parser("phantom", help="Write the Shepp-Logan phantom as PGM")
    ph.add_argument("--n", type=int, help="Image side (defaults to RECOVER_DEFAULT_N)")
    ph.add_argument("--out", type=str, required=True, help="Destination .pgm path")

    rip = sub.add_parser("rip", help="Estimate the restricted isometry constant of a generated operator")
    rip.add_argument("--kind", choices=RIP_KINDS, required=True, help="Operator kind")
    rip.add_argument("--m", type=int, help="Measurement count (ignored for identity)")
    rip.add_argument("--s", type=int, required=True, help="Sparsity order")
    rip.add_argument("--n", type=int, help="Image side")
    rip.add_argument("--d", type=int, help="Vector length for identity/gaussian kinds (overrides --n)")
    rip.add_argument("--trials", type=int, default=1000, help="Probes for the sampled estimate")
    rip.add_argument("--seed", type=int, help="Seed (defaults to RECOVER_SEED)")
    rip.add_argument("--haar", action="store_true", help="Compose with the inverse Haar transform")
    rip.add_argument("--exhaustive", action="store_true", help="Scan every support instead of sampling")
    return parser


def _rip_operator(args, settings: RecoveryConfig, seed: int) -> MeasurementOp:
    n = args.n or settings.default_n
    shape = (args.d, 1) if args.d else (n, n)
    if args.kind == "identity":
        op = identity_op(*shape)
    elif args.m is None:
        raise InvalidInputError(f"--m is required for {args.kind} operators")
    elif args.kind == "gaussian":
        op = gaussian_op(args.m, shape[0], shape[1], seed)
    elif args.d:
        raise InvalidInputError("--d applies to identity and gaussian operators only")
    elif args.kind == "fourier_signed":
        op = fourier_signed_op(args.m, n, seed)
    else:
        op = fourier_plain_op(args.m, n, seed)
    if args.haar:
        op = compose_with_inverse_haar(op)
    return op


def _print_json(payload) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def main(argv: Optional[List[str]] = None) -> int:
    """
    Entry point of the `recover` command.

    Returns:
        int: 0 on success, 1 when a suite fails, 2 on invalid input
    """
    args = build_parser().parse_args(argv)
    try:
        settings = RecoveryConfig()
    except InvalidInputError as e:
        logging.basicConfig(level=logging.INFO, format=LOG_FORMAT)
        logger.error(f"Invalid configuration: {str(e)}")
        return 2
    logging.basicConfig(level=getattr(logging, settings.log_level), format=LOG_FORMAT)

    try:
        if args.command == "run":
            rows = run_experiment(ExperimentConfig.load(args.config), settings)
            _print_json([row.to_dict() for row in rows])
            return 0

        if args.command == "suite":
            seed = settings.seed if args.seed is None else args.seed
            report = run_property_suite(args.name, {"n": args.n, "seed": seed, "trials": args.trials})
            _print_json(report)
            return 0 if report["passed"] else 1

        if args.command == "phantom":
            meta = write_pgm(args.out, phantom(args.n or settings.default_n))
            _print_json({"path": args.out, **meta})
            return 0

        seed = settings.seed if args.seed is None else args.seed
        op = _rip_operator(args, settings, seed)
        if args.exhaustive:
            estimate = estimate_rip_exhaustive(op, args.s)
        else:
            estimate = estimate_rip_sampled(op, args.s, args.trials, seed)
        _print_json({"operator": op.kind, "m": op.m, **estimate.to_dict()})
        return 0
    except (InvalidInputError, RipBudgetError) as e:
        logger.error(str(e))
        return 2


if __name__ == "__main__":
    sys.exit(main())
