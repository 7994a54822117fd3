"""Command line entry point: ``hartree-lab run|sweep|check|plot``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import experiment, plots
from .errors import HartreeLabError


def _emit(record: dict):
    print(json.dumps(record, sort_keys=True))


def _error(exc: BaseException, out_dir=None) -> int:
    kind = getattr(exc, "kind", "io" if isinstance(exc, OSError) else "error")
    record = {"status": "error", "error": kind, "message": str(exc)}
    if out_dir is not None:
        try:
            experiment.write_error(out_dir, exc)
        except OSError:
            pass
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return 2


def _load(args) -> experiment.ExperimentConfig:
    cfg = experiment.ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output = args.out
    return cfg


def _status(passed: bool, warnings, strict: bool) -> int:
    if not passed:
        return 1
    if strict and warnings:
        return 1
    return 0


def cmd_run(args) -> int:
    cfg = _load(args)
    out = Path(cfg.output)
    try:
        report = experiment.simulate(cfg)
    except HartreeLabError as exc:
        experiment.write_error(out, exc)
        raise
    experiment.write_report(report, out)
    plots.plot_run(report.columns(), out, report.particles)
    failed = report.failed_checks()
    _emit({"status": "pass" if report.passed else "fail", "out": str(out),
           "failed": sorted({c.name for c in failed}), "warnings": report.warnings,
           "derivative_ratio": None if report.derivative is None else report.derivative["ratio"]})
    return _status(report.passed, report.warnings, args.strict)


def cmd_sweep(args) -> int:
    cfg = _load(args)
    out = Path(cfg.output)
    result = experiment.sweep(cfg, out, jobs=args.jobs)
    good = [e for e in result.entries if "error" not in e]
    if good:
        plots.plot_sweep([e["particles"] for e in good], [e["max_alpha"] for e in good], out)
    _emit({"status": "pass" if result.passed else "fail", "out": str(out), "slope": result.slope,
           "slope_band_95": list(result.slope_band)})
    return _status(result.passed, [], args.strict)


def cmd_check(args) -> int:
    checks = experiment.recheck(args.report_dir)
    families: dict = {}
    for c in checks:
        fam = families.setdefault(c.name, [0, 0])
        fam[0] += 1
        fam[1] += int(not c.passed)
    for name, (count, bad) in sorted(families.items()):
        print(f"{'PASS' if bad == 0 else 'FAIL'} {name}: {count - bad}/{count}")
    passed = all(c.passed for c in checks)
    warnings = experiment.read_summary(args.report_dir).get("warnings", [])
    return _status(passed, warnings, args.strict)


def cmd_plot(args) -> int:
    series = experiment.read_timeseries(args.report_dir)
    N = int(experiment.read_summary(args.report_dir)["particles"])
    for p in plots.plot_run(series, args.report_dir, N):
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hartree-lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--strict", action="store_true", help="treat warnings as failures")

    for name, fn, help_ in (("run", cmd_run, "simulate one configuration"),
                            ("sweep", cmd_sweep, "simulate over the particle list")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--jobs", type=int, default=1)
        common(p)
        p.set_defaults(func=fn)
    for name, fn, help_ in (("check", cmd_check, "re-run bound checks on a report"),
                            ("plot", cmd_plot, "regenerate figures for a report")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("report_dir")
        common(p)
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = getattr(args, "out", None)
    try:
        return args.func(args)
    except (HartreeLabError, OSError, ValueError, KeyError) as exc:
        return _error(exc, out)


if __name__ == "__main__":
    sys.exit(main())
