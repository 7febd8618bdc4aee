"""Command-line front end for geodesic Monte Carlo sampling.

Usage:
    python main.py sample --config resources/sphere_vmf.json [--seed N] [--threads N] [--output DIR]
    python main.py verify linalg|gradients|reduction|reversibility|statistical|all [--seed N] [--samples N]
    python main.py diagnose output/run/chain_0.csv [--output summary.json]
"""
import argparse
import json
import sys
from typing import List, Optional

from src.tools.verify_suites import SUITES, run_suite
from src.utils.errors import DriftTooLarge, GeodesicMCError, InvalidInput, NumericalFailure
from src.utils.logger import get_logger
from src.workflow import cmd_diagnose, cmd_sample

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_INVALID = 2
EXIT_DRIFT = 3
EXIT_NUMERICAL = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geodesic-mc", description="Geodesic Monte Carlo on spheres and Stiefel manifolds")
    sub = parser.add_subparsers(dest="command", required=True)

    sample = sub.add_parser("sample", help="run the chains described by a JSON config")
    sample.add_argument("--config", required=True, help="path of the run config")
    sample.add_argument("--seed", type=int, default=None, help="override sampler.seed")
    sample.add_argument("--threads", type=int, default=None, help="chains run concurrently (default GMC_THREADS)")
    sample.add_argument("--output", default=None, help="output directory (overrides the config)")

    verify = sub.add_parser("verify", help="run a built-in verification suite")
    verify.add_argument("suite", choices=sorted(SUITES) + ["all"])
    verify.add_argument("--seed", type=int, default=None)
    verify.add_argument("--samples", type=int, default=None, help="chain length for the statistical suite")

    diagnose = sub.add_parser("diagnose", help="recompute the summary of a saved sample file")
    diagnose.add_argument("file", help="chain CSV written by 'sample'")
    diagnose.add_argument("--output", default=None, help="also write the summary to this JSON file")
    return parser


def _verify(args) -> int:
    names = sorted(SUITES) if args.suite == "all" else [args.suite]
    ok = True
    for name in names:
        print(f"== {name} ==")
        for result in run_suite(name, seed=args.seed, n_samples=args.samples):
            print(result.line())
            ok = ok and result.passed
    print("all checks passed" if ok else "some checks FAILED")
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logger.info(f"Entering main with command: {args.command}")
    try:
        if args.command == "sample":
            summary = cmd_sample(args.config, seed=args.seed, threads=args.threads, output=args.output)
            for chain in summary["chains"]:
                print(f"chain {chain['chain_index']}: {chain['n_samples']} samples, "
                      f"acceptance {chain['acceptance_rate']:.3f} -> {chain['file']}")
            return EXIT_OK
        if args.command == "verify":
            return _verify(args)
        if args.command == "diagnose":
            print(json.dumps(cmd_diagnose(args.file, output=args.output), indent=2, sort_keys=True))
            return EXIT_OK
    except InvalidInput as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except DriftTooLarge as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DRIFT
    except (NumericalFailure, GeodesicMCError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
