"""``nodal-kac <histogram|lln|validate|sharp-check> --config PATH [--seed S] [--out DIR] [--workers W]``.

Exit status: 0 success, 1 validation failure or aborted run, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config
from . import runs

COMMANDS = ("histogram", "lln", "validate", "sharp-check")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nodal-kac", description="Closed Kac-Rice nodal-volume experiments.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="INI file with [section] key = value entries")
    p.add_argument("--seed", type=int, help="override run.seed")
    p.add_argument("--out", help="override run.out")
    p.add_argument("--workers", type=int, help="override run.workers")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = cfg.with_overrides(**{"run.seed": args.seed, "run.out": args.out, "run.workers": args.workers})
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "histogram":
            for rep in runs.run_histogram(cfg):
                print(f"lambda={rep.lam:g}  atom_mass={rep.atom_mass:.4f}  n={rep.n}  bins={len(rep.counts)}  "
                      f"resampled={rep.resampled}")
            return 0
        if args.command == "lln":
            rep = runs.run_lln(cfg)
            print(f"final ratio {rep.ratios[-1]:.6f}  limit {rep.limit:.6f}  "
                  f"difference {rep.ratios[-1] - rep.limit:+.6f}")
            return 0
        if args.command == "validate":
            cases = runs.run_validate(cfg)
            for c in cases:
                print(f"{'PASS' if c.passed else 'FAIL'}  {c.case_id:<34} expected={c.expected:.10g} "
                      f"got={c.got:.10g} tol={c.tol:g}")
            failed = sum(not c.passed for c in cases)
            print(f"{len(cases) - failed}/{len(cases)} cases passed")
            return 1 if failed else 0
        rep = runs.run_sharp_check(cfg)
        print(rep.note)
        print(f"max analytic-vs-FD relative error {max(rep.fd_errors):.3e} "
              f"({rep.kinked_pairs} pair(s) have a node with |f/hat| < eps_fd)")
        print(f"max self-direction |sharp|/Vol {max(rep.self_direction):.3e}")
        print(f"phase-direction |sharp|/Vol {rep.phase_direction:.3e}")
        print(f"linearity-in-hat error {rep.linearity_error:.3e}")
        print(f"min non-degeneracy inner mean {min(rep.inner_means):.6g}")
        return 0 if rep.passed else 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except runs.RunAborted as exc:
        print(f"run aborted: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
