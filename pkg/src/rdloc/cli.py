"""Command line entry point: ``rdloc counterexample|sweep|tree|localize``.

Exit codes: 0 when every check passes, 2 when a frozen regression interval
or an exact inequality is violated, 1 on any other error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import experiments
from .errors import RdlocError

log = logging.getLogger("rdloc")

COMMANDS = {
    "counterexample": experiments.run_counterexample,
    "sweep": experiments.run_robustness_sweep,
    "tree": experiments.run_tree_study,
    "localize": experiments.run_localize,
}


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from exc


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rdloc", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--eps", type=_floats, default=(), help="comma separated epsilon values")
    p.add_argument("--degree", type=_ints, default=(1,), help="polynomial degree(s), 1-3")
    p.add_argument("--mesh", default=None, help="mesh file in rdmesh format")
    p.add_argument("--target", default="", help="comma separated target names")
    p.add_argument("--out", default=None, help="output directory for CSV and JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=64)
    p.add_argument("--rounds", type=int, default=0, help="uniform refinement rounds of the default mesh")
    p.add_argument("--bc", choices=["none", "dirichlet"], default="none")
    p.add_argument("--write-baseline", default=None, metavar="FILE",
                   help="sweep only: write the observed ratio intervals as a new baseline")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = experiments.ExperimentConfig(
            name=args.command, eps=args.eps, degrees=args.degree,
            targets=tuple(t for t in args.target.split(",") if t),
            rounds=args.rounds, budget=args.budget, bc=args.bc, mesh_path=args.mesh,
            out=args.out, seed=args.seed)
        result = COMMANDS[args.command](cfg)
        if args.write_baseline and args.command == "sweep":
            base = {"schema": 1,
                    "ratios": experiments.baseline_from_summary(result.summary["ratios"])}
            with open(args.write_baseline, "w") as fh:
                json.dump(base, fh, indent=2, sort_keys=True)
                fh.write("\n")
    except (RdlocError, ValueError, OSError) as exc:
        print(f"rdloc: error: {exc}", file=sys.stderr)
        return 1
    if args.out:
        result.write(args.out)
    else:
        for text in result.tables.values():
            sys.stdout.write(text)
    for v in result.violations:
        print(f"rdloc: violation: {v}", file=sys.stderr)
    return 0 if result.passed else 2


if __name__ == "__main__":
    sys.exit(main())
