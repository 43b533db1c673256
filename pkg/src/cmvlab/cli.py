"""Command line entry points.

    cmvlab run  --config cfg.json [--seed S] [--trials T] [--out DIR]
                [--experiment NAME] [--n N]
    cmvlab plot --report report.json --kind histogram [--out DIR]

Configs are single JSON objects; flags override individual fields.  The
resolved config is hashed into every artifact.  CMVLAB_THREADS caps the
worker pool.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from .errors import ConfigurationError
from .experiments import (EXPERIMENTS, ExperimentConfig, Report,
                          emit_plot_data, run_experiment)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cmvlab",
        description="Eigenvalue statistics experiments for random CMV "
                    "matrices with decaying coefficients")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a JSON config")
    run.add_argument("--config", type=Path,
                     help="JSON config file (optional if --experiment given)")
    run.add_argument("--experiment", choices=sorted(EXPERIMENTS),
                     help="experiment name (overrides config)")
    run.add_argument("--seed", type=int, help="override the seed")
    run.add_argument("--trials", type=int, help="override the trial count")
    run.add_argument("--n", type=int, help="override the matrix size")
    run.add_argument("--out", type=Path, help="output directory")

    plot = sub.add_parser("plot", help="emit plot CSVs from a report")
    plot.add_argument("--report", type=Path, required=True)
    plot.add_argument("--kind", required=True,
                      choices=["histogram", "decay_profile", "path_bundle"])
    plot.add_argument("--out", type=Path, default=Path("."))
    return parser


def _cmd_run(args) -> int:
    raw = {}
    if args.config is not None:
        raw = json.loads(Path(args.config).read_text())
    if args.experiment is not None:
        raw["experiment"] = args.experiment
    if "experiment" not in raw:
        print("error: no experiment given (config file or --experiment)",
              file=sys.stderr)
        return 2
    for key in ("seed", "trials", "n"):
        val = getattr(args, key)
        if val is not None:
            raw[key] = val
    if args.out is not None:
        raw["output_dir"] = str(args.out)
    try:
        cfg = ExperimentConfig.from_dict(raw)
    except (ConfigurationError, KeyError, ValueError) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 2
    report = run_experiment(cfg)
    for rec in report.records:
        status = {True: "pass", False: "FAIL", None: "info"}[rec.passed]
        ref = "" if rec.reference_value is None else \
            f" (ref {rec.reference_value:.6g})"
        print(f"[{status}] {rec.name} = {rec.value:.6g}{ref}")
    if report.failures:
        print(f"{report.failures} trial-level numerical failure(s) recorded")
    if cfg.output_dir:
        print(f"report written to {cfg.output_dir}")
    return 0 if report.passed() else 1


def _cmd_plot(args) -> int:
    body = json.loads(Path(args.report).read_text())
    report = Report(experiment=body["experiment"],
                    config_hash=body["config_hash"],
                    records=[], series=body.get("series", {}),
                    failures=body.get("failures", 0),
                    wall_time=body.get("wall_time", 0.0))
    try:
        written = emit_plot_data(report, args.kind, args.out)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_plot(args)


if __name__ == "__main__":
    sys.exit(main())
