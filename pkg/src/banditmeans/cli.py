"""Command line front end.

Exit codes: 0 when every executed check holds (inconclusive shape
reports do not block), 1 when any check is violated or errored, 2 for
unusable invocations (bad config, unknown scenario, bad flags).
"""

from __future__ import annotations

import argparse
import sys

from .bounds import BOUND_CATALOG
from .errors import ConfigError
from .harness import SCENARIO_NAMES, ExperimentConfig, run, scenario, write_report

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="banditmeans",
        description="Monte Carlo checks for mean estimation under adaptive "
        "sampling, stopping, choosing, and rewinding.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment from a JSON config file")
    run_p.add_argument("config", help="path to the config JSON")
    run_p.add_argument("--out", default=None, help="directory for report.json/report.txt/plots")
    run_p.add_argument("--workers", type=int, default=1)
    run_p.add_argument("--engine", choices=("auto", "reference"), default="auto")

    sc_p = sub.add_parser("scenario", help="run a built-in scenario by name")
    sc_p.add_argument("name")
    sc_p.add_argument("--reps", type=int, default=None, help="override repetition count")
    sc_p.add_argument("--seed", type=int, default=None, help="override the root seed")
    sc_p.add_argument("--out", default=None)
    sc_p.add_argument("--workers", type=int, default=1)
    sc_p.add_argument("--engine", choices=("auto", "reference"), default="auto")

    sub.add_parser("list-scenarios", help="list built-in scenario names")
    sub.add_parser("catalog", help="print the table of implemented bounds")
    return p


def _finish(report, out) -> int:
    if out:
        write_report(report, out)
    sys.stdout.write(report.render_text())
    if report.n_violated or report.n_failed:
        return 1
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors and 0 on --help
        return int(e.code or 0) and 2

    try:
        if args.command == "run":
            cfg = ExperimentConfig.from_file(args.config)
            report = run(cfg, workers=args.workers, engine=args.engine)
            return _finish(report, args.out)
        if args.command == "scenario":
            cfg = scenario(args.name, n_reps=args.reps, root_seed=args.seed)
            report = run(cfg, workers=args.workers, engine=args.engine)
            return _finish(report, args.out)
        if args.command == "list-scenarios":
            for name in SCENARIO_NAMES:
                sys.stdout.write(name + "\n")
            return 0
        if args.command == "catalog":
            w = max(len(r["name"]) for r in BOUND_CATALOG)
            for r in BOUND_CATALOG:
                sys.stdout.write(
                    f"{r['name']:<{w}}  {r['setting']}\n"
                    f"{'':<{w}}  statistic: {r['statistic']}\n"
                    f"{'':<{w}}  bound:     {r['bound']}\n"
                )
            return 0
        parser.error(f"unknown command {args.command!r}")
    except ConfigError as e:
        sys.stderr.write(f"error: {e}\n")
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
