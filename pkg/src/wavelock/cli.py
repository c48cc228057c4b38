"""Command-line front end.

Subcommands:
    calibrate   run both calibration sweeps, write calibration.json
    run         run one scenario and write its report files
    adev        recompute ADEV from a wavelength_series.csv
    report      print the summary of a finished run directory

Exit codes: 0 success, 1 configuration/validation error, 2 runtime or
convergence failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .calibration import CalibrationError, save_calibration
from .config import ConfigError, ExperimentConfig, load_config
from .harness import (
    ControlLoopError,
    run_calibrations,
    run_scenario,
    write_report,
)
from .stability import WavelengthSeries, allan_deviation, default_taus

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _load(args) -> ExperimentConfig:
    if args.config is not None:
        cfg = load_config(args.config)
    else:
        cfg = ExperimentConfig()
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "output", None) is not None:
        updates["output_dir"] = str(args.output)
    if updates:
        cfg = dataclasses.replace(cfg, **updates)
    return cfg


def _cmd_calibrate(args) -> int:
    cfg = _load(args)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    record = run_calibrations(cfg, noiseless=args.noiseless)
    path = out / "calibration.json"
    save_calibration(record, path)
    print(f"gdd_ps_per_nm      = {record.gdd_ps_per_nm:.4f} +/- {record.gdd_stderr:.4f}")
    print(f"slope_t_ps_per_c   = {record.slope_t_ps_per_c:.4f} +/- {record.slope_t_stderr:.4f}")
    print(
        "dlambda_dt_nm_per_c = "
        f"{record.dlambda_dt_nm_per_c:.5f} +/- {record.dlambda_dt_stderr:.5f}"
    )
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = _load(args)
    report = run_scenario(cfg, args.scenario)
    outdir = Path(cfg.output_dir) / args.scenario
    paths = write_report(report, outdir)
    print(
        f"{args.scenario}: {report.diagnostics['cycles']} cycles, "
        f"sd = {report.summary.sd_pm:.2f} pm, "
        f"p2p = {report.summary.peak_to_peak_pm:.2f} pm"
    )
    if args.verbose:
        for p in paths:
            print(f"wrote {p}")
    return EXIT_OK


def _cmd_adev(args) -> int:
    data = np.genfromtxt(args.series, delimiter=",", names=True)
    if data.dtype.names is None or "lambda_nm" not in data.dtype.names:
        raise ConfigError(f"{args.series} is not a wavelength_series.csv file")
    times = np.atleast_1d(data["time_s"])
    values = np.atleast_1d(data["lambda_nm"])
    if len(times) < 2:
        raise ConfigError("series too short")
    interval = float(times[1] - times[0])
    series = WavelengthSeries(interval, values, reference_nm=args.reference)
    taus = default_taus(len(values), interval, args.taus_per_decade)
    curve = allan_deviation(series, taus)
    lines = ["tau_s,adev,n_samples"]
    for tau, a, n in zip(curve.taus_s, curve.adev, curve.n_samples):
        lines.append(f"{format(tau, '.9g')},{format(a, '.9g')},{int(n)}")
    text = "\n".join(lines) + "\n"
    if args.output is not None:
        Path(args.output).write_text(text, encoding="utf-8")
        print(f"wrote {args.output}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_report(args) -> int:
    path = Path(args.run) / "summary.json"
    if not path.exists():
        raise ConfigError(f"no summary.json under {args.run}")
    with open(path, "r", encoding="utf-8") as fh:
        summary = json.load(fh)
    print(f"scenario          {summary['scenario']}")
    print(f"seed              {summary['seed']}")
    print(f"sd_pm             {summary['sd_pm']:.3f}")
    print(f"peak_to_peak_pm   {summary['peak_to_peak_pm']:.3f}")
    for key, value in sorted(summary["diagnostics"].items()):
        print(f"{key:<17} {value}")
    cal = summary.get("calibration")
    if cal:
        print(f"gdd_ps_per_nm     {cal['gdd_ps_per_nm']:.4f}")
        print(f"dlambda_dt        {cal['dlambda_dt_nm_per_c']:.5f} nm/degC")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wavelock",
        description="Simulated wavelength stabilization of a photon-pair source",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="run calibration sweeps")
    p.add_argument("--config", type=Path, default=None, help="JSON config file")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--output", type=Path, default=None, help="override output dir")
    p.add_argument("--noiseless", action="store_true", help="disable counting noise")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("run", help="run one scenario")
    p.add_argument(
        "scenario", choices=["open-loop", "closed-loop", "pump-floor"],
        help="which scenario to run",
    )
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", type=Path, default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("adev", help="recompute ADEV from a series CSV")
    p.add_argument("--series", type=Path, required=True, help="wavelength_series.csv")
    p.add_argument("--output", type=Path, default=None, help="write CSV here")
    p.add_argument("--reference", type=float, default=None, help="reference wavelength nm")
    p.add_argument("--taus-per-decade", type=int, default=10)
    p.set_defaults(func=_cmd_adev)

    p = sub.add_parser("report", help="print the summary of a run directory")
    p.add_argument("--run", type=Path, required=True, help="run output directory")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CalibrationError, ControlLoopError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
