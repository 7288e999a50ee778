"""Command-line entry point.

Subcommands: example1, example2 (full pipelines), sim-mpc, train,
sim-farma (individual stages), and bench (timing report over a
completed run). --config accepts a path to an INI file or the name of a
built-in scenario; full pipelines write the resolved config next to
their outputs. Exit code 0 means every stage assertion passed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from farma.configs import ScenarioConfig, builtin_config, load_config
from farma.experiments import (
    StageError,
    bench_timing,
    run_scenario,
    sim_farma_stage,
    sim_mpc_stage,
    train_stage,
)

_BUILTINS = ("example1", "example2")


def _resolve_config(value: str | None, default: str) -> ScenarioConfig:
    if value is None:
        return builtin_config(default)
    if value in _BUILTINS:
        return builtin_config(value)
    return load_config(Path(value))


def _add_common(parser, default_out):
    parser.add_argument("--config", help="INI file or built-in scenario name")
    parser.add_argument("--out", default=default_out, help="output directory")
    parser.add_argument(
        "--paper-compat", action="store_true",
        help="use the legacy double-integrator input matrix [ts^2; ts]",
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="farma",
        description="MPC-guided synthesis of fuzzy-blended ARMA controllers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name in _BUILTINS:
        p = sub.add_parser(name, help=f"run the {name} pipeline end to end")
        _add_common(p, default_out=f"out_{name}")

    p = sub.add_parser("sim-mpc", help="run the data-generation simulations only")
    _add_common(p, default_out="out")

    p = sub.add_parser("train", help="fit coefficient bundles from exported CSVs")
    _add_common(p, default_out="out")

    p = sub.add_parser("sim-farma", help="run the blended controller from bundles")
    _add_common(p, default_out="out")

    p = sub.add_parser("bench", help="per-step timing report over a completed run")
    _add_common(p, default_out="out")

    args = parser.parse_args(argv)
    try:
        if args.command in _BUILTINS:
            config = _resolve_config(args.config, args.command)
            report = run_scenario(config, args.out, paper_compat=args.paper_compat)
            print(report.summary_path.read_text(), end="")
        elif args.command == "sim-mpc":
            config = _resolve_config(args.config, "example1")
            paths = sim_mpc_stage(config, args.out, paper_compat=args.paper_compat)
            for name, path in paths.items():
                print(f"{name}: {path}")
        elif args.command == "train":
            config = _resolve_config(args.config, "example1")
            thetas = train_stage(config, args.out)
            for i in sorted(thetas):
                print(f"theta{i}: {thetas[i].size} coefficients")
        elif args.command == "sim-farma":
            config = _resolve_config(args.config, "example1")
            path = sim_farma_stage(config, args.out)
            print(path)
        elif args.command == "bench":
            config = _resolve_config(args.config, "example1")
            report = bench_timing(config, args.out)
            print(f"mpc step:   {report.mpc_step_seconds:.3e} s")
            print(f"farma step: {report.farma_step_seconds:.3e} s")
            print(f"ratio:      {report.ratio:.1f}")
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
