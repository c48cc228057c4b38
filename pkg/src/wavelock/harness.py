"""Scenario orchestration: calibration, loop runs, reports.

One control cycle is one histogram: the plant and pump advance by the
control period, a coincidence histogram is synthesized and fitted, and
(in closed loop) the controller updates the oven setpoint for the next
cycle. Runs are reproducible from (config, seed): the seed is split into
independent streams for plant, pump, measurement, and calibration noise,
and each stream consumes the same number of draws per cycle in every
scenario, so matched-seed runs share identical disturbance histories.

Report files (all regenerable bit-exactly from config + seed):

* wavelength_series.csv   time_s,lambda_nm
* controller_log.csv      cycle,time_s,tau0_ps,dtau_ps,gated,deltaT_C,
                          epsilon_C,correction_accum_C,setpoint_C
* adev.csv                tau_s,adev,n_samples
* drift_histogram.csv     bin_center_pm,count
* summary.json            stats, diagnostics, calibration, config echo

Floats in CSV files are rendered with 9 significant digits.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .calibration import (
    CalibrationRecord,
    bandpass_rms,
    calibrate_gdd,
    calibrate_temp_coefficient,
    load_calibration,
    save_calibration,
)
from .config import ExperimentConfig
from .controller import PidState, PidGains, commanded_setpoint, initialize, pid_update
from .dft import (
    CoincidenceHistogram,
    DftChain,
    GaussianFit,
    expected_profile,
    fit_gaussian,
    predict_tau0,
    sample_histogram,
)
from .plant import (
    idler_center_wavelength,
    initial_plant_state,
    step_plant,
    step_pump,
)
from .stability import (
    AdevCurve,
    DriftSummary,
    WavelengthSeries,
    allan_deviation,
    default_taus,
    summarize,
)

__all__ = [
    "ControlLoopError",
    "MeasurementSim",
    "CycleRecord",
    "RunReport",
    "run_calibrations",
    "run_open_loop",
    "run_closed_loop",
    "run_pump_floor",
    "run_scenario",
    "write_report",
]

# Abort threshold for persistent measurement failures.
_MAX_FAILED_FRACTION = 0.5
_MIN_CYCLES_BEFORE_ABORT = 20


class ControlLoopError(RuntimeError):
    """The run could not produce a usable wavelength series."""


def _fmt(x: float) -> str:
    return format(float(x), ".9g")


class MeasurementSim:
    """Synthesizes one fitted coincidence measurement per call.

    The simulator stands in for the TCSPC + dispersive fiber: it knows
    the true chain constants in order to generate data, while fits only
    ever see the histogram. Calibration helpers freeze the source at the
    nominal degenerate wavelength (drift is held during calibration).
    """

    def __init__(
        self,
        chain: DftChain,
        sigma_i_nm: float,
        lambda_nominal_nm: float,
        rng: np.random.Generator,
        noiseless: bool = False,
        tuning_curve=None,
    ) -> None:
        self.chain = chain
        self.sigma_i_nm = sigma_i_nm
        self.lambda_nominal_nm = lambda_nominal_nm
        self.rng = rng
        self.noiseless = noiseless
        self.tuning_curve = tuning_curve  # temp_c -> lambda_nm, for sweeps

    def measure(
        self,
        lambda_true_nm: float,
        sigma_nm: float,
        window_center_ps: float,
        rate_scale: float = 1.0,
    ) -> tuple[GaussianFit, CoincidenceHistogram]:
        profile = expected_profile(
            self.chain, lambda_true_nm, sigma_nm, window_center_ps, rate_scale
        )
        if self.noiseless:
            hist = CoincidenceHistogram(
                bin_edges_ps=profile.bin_edges_ps,
                counts=profile.mean_counts,
                integration_time_s=profile.integration_time_s,
            )
        else:
            hist = sample_histogram(profile, self.rng)
        return fit_gaussian(hist, self.chain.min_total_counts), hist

    # -- calibration protocol -------------------------------------------------

    def measure_filtered(self, center_nm: float, rms_nm: float) -> GaussianFit:
        """Peak fit behind a narrowband filter; window fixed at nominal.

        The pair rate is scaled by the overlap of the filter passband
        (rectangular, width sqrt(12)*rms) with the source spectrum.
        """
        half = math.sqrt(12.0) * rms_nm / 2.0
        z_hi = (center_nm + half - self.lambda_nominal_nm) / self.sigma_i_nm
        z_lo = (center_nm - half - self.lambda_nominal_nm) / self.sigma_i_nm
        overlap = float(_ndtr(z_hi) - _ndtr(z_lo))
        window_center = predict_tau0(self.chain, self.lambda_nominal_nm)
        fit, _ = self.measure(center_nm, rms_nm, window_center, rate_scale=overlap)
        return fit

    def measure_at_temperature(self, temp_c: float) -> GaussianFit:
        """Peak fit with the source tuned to ``temp_c`` (drift frozen).

        The window recenters on the predicted peak for each setpoint,
        standing in for a wide-span timing record.
        """
        if self.tuning_curve is None:
            raise ValueError("this simulator has no temperature tuning curve bound")
        lam = self.tuning_curve(temp_c)
        fit, _ = self.measure(lam, self.sigma_i_nm, predict_tau0(self.chain, lam))
        return fit


def _ndtr(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def _spawn_rngs(seed: int) -> dict[str, np.random.Generator]:
    plant_ss, pump_ss, meas_ss, calib_ss = np.random.SeedSequence(seed).spawn(4)
    return {
        "plant": np.random.default_rng(plant_ss),
        "pump": np.random.default_rng(pump_ss),
        "meas": np.random.default_rng(meas_ss),
        "calib": np.random.default_rng(calib_ss),
    }


def run_calibrations(
    cfg: ExperimentConfig,
    noiseless: bool = False,
    record_path=None,
) -> CalibrationRecord:
    """Run both calibration sweeps with the plant drift frozen.

    Returns the combined record; writes it to ``record_path`` when
    given. Uses the dedicated calibration noise stream of the seed.
    """
    rng = _spawn_rngs(cfg.seed)["calib"]
    wg = cfg.waveguide
    # Frozen drift: the source sits exactly on its linear tuning curve.
    sim = MeasurementSim(
        cfg.dft,
        wg.sigma_i_nm,
        wg.lambda_deg_nm,
        rng,
        noiseless,
        tuning_curve=lambda temp_c: (
            wg.lambda_deg_nm + wg.dlambda_dt_nm_per_c * (temp_c - wg.t0_c)
        ),
    )

    cal_cfg = cfg.calibration
    gdd_fit = calibrate_gdd(
        sim, cal_cfg.gdd_sweep_centers(), bandpass_rms(cal_cfg.filter_bandwidth_nm)
    )
    temp_fit = calibrate_temp_coefficient(
        sim, cal_cfg.temp_sweep(), gdd_fit.slope, gdd_fit.slope_stderr
    )
    record = CalibrationRecord(
        gdd_ps_per_nm=gdd_fit.slope,
        gdd_stderr=gdd_fit.slope_stderr,
        slope_t_ps_per_c=temp_fit.slope_ps_per_c,
        slope_t_stderr=temp_fit.slope_stderr,
        dlambda_dt_nm_per_c=temp_fit.dlambda_dt_nm_per_c,
        dlambda_dt_stderr=temp_fit.dlambda_dt_stderr,
    )
    if record_path is not None:
        save_calibration(record, record_path)
    return record


@dataclass(frozen=True)
class CycleRecord:
    """One controller-log row."""

    cycle: int
    time_s: float
    tau0_ps: float
    dtau_ps: float
    gated: int
    delta_t_c: float
    epsilon_c: float
    correction_accum_c: float
    setpoint_c: float


@dataclass(frozen=True)
class RunReport:
    """Everything produced by one scenario run."""

    scenario: str
    seed: int
    config: dict
    calibration: CalibrationRecord | None
    cycles: list[CycleRecord]
    series: WavelengthSeries
    summary: DriftSummary
    adev: AdevCurve
    diagnostics: dict


def _resolve_calibration(
    cfg: ExperimentConfig, calibration: CalibrationRecord | None
) -> CalibrationRecord:
    if calibration is not None:
        return calibration
    rec_file = cfg.calibration.record_file
    if rec_file is not None and Path(rec_file).exists():
        return load_calibration(rec_file)
    return run_calibrations(cfg)


def _analyze(
    cfg: ExperimentConfig, values_nm: np.ndarray
) -> tuple[WavelengthSeries, DriftSummary, AdevCurve]:
    series = WavelengthSeries(cfg.control_period_s, values_nm)
    summary = summarize(series, cfg.analysis.histogram_bins)
    taus = default_taus(len(values_nm), cfg.control_period_s, cfg.analysis.taus_per_decade)
    return series, summary, allan_deviation(series, taus)


def _run_measured_loop(
    cfg: ExperimentConfig,
    control_enabled: bool,
    calibration: CalibrationRecord | None,
    noiseless: bool = False,
) -> RunReport:
    record = _resolve_calibration(cfg, calibration)
    rngs = _spawn_rngs(cfg.seed)
    wg, plant_params, pump, chain = cfg.waveguide, cfg.plant, cfg.pump, cfg.dft
    pid_cfg = cfg.pid
    dt = cfg.control_period_s

    sim = MeasurementSim(chain, wg.sigma_i_nm, wg.lambda_deg_nm, rngs["meas"], noiseless)
    state = initial_plant_state(plant_params, wg.t0_c)
    pump_offset = 0.0
    setpoint = wg.t0_c

    pid: PidState | None = None
    tau0_ref: float | None = None  # anchor for wavelength estimates
    window_center = predict_tau0(chain, wg.lambda_deg_nm)

    cycles: list[CycleRecord] = []
    values: list[float] = []
    failed = 0
    gated_cycles = 0
    corrections = 0

    n_cycles = cfg.n_cycles
    for k in range(n_cycles):
        state = step_plant(state, plant_params, dt, setpoint, rngs["plant"])
        pump_offset = step_pump(pump_offset, pump, dt, rngs["pump"])
        lam_true = idler_center_wavelength(wg, state, pump_offset, pump.coupling)
        t_now = state.t_s

        fit, _ = sim.measure(lam_true, wg.sigma_i_nm, window_center)
        if not fit.converged:
            failed += 1
            if k + 1 >= _MIN_CYCLES_BEFORE_ABORT and failed > _MAX_FAILED_FRACTION * (k + 1):
                raise ControlLoopError(
                    f"{failed} of {k + 1} cycles failed to fit a peak; "
                    "check rates, window, and min_total_counts"
                )
            if values:
                values.append(values[-1])  # hold last estimate on a dropout
                cycles.append(
                    CycleRecord(k, t_now, float("nan"), float("nan"), 1, float("nan"),
                                0.0, 0.0 if pid is None else pid.correction_accum_c, setpoint)
                )
            continue

        window_center = fit.tau0_ps
        if tau0_ref is None:
            tau0_ref = fit.tau0_ps
        dtau_ref = fit.tau0_ps - tau0_ref
        values.append(wg.lambda_deg_nm + dtau_ref / record.gdd_ps_per_nm)

        if control_enabled:
            if pid is None:
                pid = initialize(
                    fit.tau0_ps, pid_cfg.tau_th_ps,
                    PidGains(pid_cfg.kp, pid_cfg.ki, pid_cfg.kd),
                    pid_cfg.t_min_c, pid_cfg.t_max_c,
                )
                cycles.append(CycleRecord(k, t_now, fit.tau0_ps, 0.0, 1, 0.0, 0.0, 0.0, setpoint))
                continue
            dtau = fit.tau0_ps - pid.tau0_ini_ps
            pid, eps = pid_update(pid, dtau, record.gdd_ps_per_nm, record.dlambda_dt_nm_per_c)
            gated = int(eps == 0.0)
            if gated:
                gated_cycles += 1
            else:
                corrections += 1
            setpoint = commanded_setpoint(pid, wg.t0_c)
            delta_t_inferred = dtau / (record.gdd_ps_per_nm * record.dlambda_dt_nm_per_c)
            cycles.append(
                CycleRecord(k, t_now, fit.tau0_ps, dtau, gated, delta_t_inferred,
                            eps, pid.correction_accum_c, setpoint)
            )
        else:
            delta_t_inferred = dtau_ref / (record.gdd_ps_per_nm * record.dlambda_dt_nm_per_c)
            cycles.append(
                CycleRecord(k, t_now, fit.tau0_ps, dtau_ref, 1, delta_t_inferred,
                            0.0, 0.0, setpoint)
            )

    if len(values) < 2:
        raise ControlLoopError("no usable wavelength series produced")

    series, summary, adev = _analyze(cfg, np.asarray(values))
    diagnostics = {
        "cycles": n_cycles,
        "failed_fits": failed,
        "gated_cycles": gated_cycles,
        "corrections_applied": corrections,
        "pid_skipped": 0 if pid is None else pid.skipped,
    }
    return RunReport(
        scenario="closed-loop" if control_enabled else "open-loop",
        seed=cfg.seed,
        config=_config_echo(cfg),
        calibration=record,
        cycles=cycles,
        series=series,
        summary=summary,
        adev=adev,
        diagnostics=diagnostics,
    )


def run_open_loop(
    cfg: ExperimentConfig,
    calibration: CalibrationRecord | None = None,
    noiseless: bool = False,
) -> RunReport:
    """Free-running drift: measurement active, controller disabled."""
    return _run_measured_loop(cfg, False, calibration, noiseless)


def run_closed_loop(
    cfg: ExperimentConfig,
    calibration: CalibrationRecord | None = None,
    noiseless: bool = False,
) -> RunReport:
    """Threshold-gated PID compensation referenced to the first fit."""
    return _run_measured_loop(cfg, True, calibration, noiseless)


def run_pump_floor(cfg: ExperimentConfig) -> RunReport:
    """Pump-contributed idler wavelength alone (plant frozen, no readout).

    Shares the pump noise stream with the other scenarios, so a matched
    seed reproduces the identical pump history.
    """
    rngs = _spawn_rngs(cfg.seed)
    pump = cfg.pump
    dt = cfg.control_period_s
    pump_offset = 0.0
    values = np.empty(cfg.n_cycles)
    for k in range(cfg.n_cycles):
        pump_offset = step_pump(pump_offset, pump, dt, rngs["pump"])
        values[k] = cfg.waveguide.lambda_deg_nm + pump.coupling * pump_offset
    series, summary, adev = _analyze(cfg, values)
    return RunReport(
        scenario="pump-floor",
        seed=cfg.seed,
        config=_config_echo(cfg),
        calibration=None,
        cycles=[],
        series=series,
        summary=summary,
        adev=adev,
        diagnostics={"cycles": cfg.n_cycles, "failed_fits": 0,
                     "gated_cycles": 0, "corrections_applied": 0, "pid_skipped": 0},
    )


def run_scenario(
    cfg: ExperimentConfig,
    scenario: str | None = None,
    calibration: CalibrationRecord | None = None,
) -> RunReport:
    """Dispatch one scenario (defaults to the config's scenario field)."""
    name = scenario or cfg.scenario
    if name == "open-loop":
        return run_open_loop(cfg, calibration)
    if name == "closed-loop":
        return run_closed_loop(cfg, calibration)
    if name == "pump-floor":
        return run_pump_floor(cfg)
    raise ValueError(f"unknown scenario {name!r}")


def _config_echo(cfg: ExperimentConfig) -> dict:
    from .config import config_to_dict

    return config_to_dict(cfg)


# -- report files -------------------------------------------------------------

def write_report(report: RunReport, outdir) -> list[Path]:
    """Write all report files for one run; returns the paths written."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []

    p = out / "wavelength_series.csv"
    with open(p, "w", encoding="utf-8") as fh:
        fh.write("time_s,lambda_nm\n")
        for t, v in zip(report.series.times_s, report.series.values_nm):
            fh.write(f"{_fmt(t)},{_fmt(v)}\n")
    paths.append(p)

    if report.cycles:
        p = out / "controller_log.csv"
        with open(p, "w", encoding="utf-8") as fh:
            fh.write(
                "cycle,time_s,tau0_ps,dtau_ps,gated,deltaT_C,"
                "epsilon_C,correction_accum_C,setpoint_C\n"
            )
            for c in report.cycles:
                fh.write(
                    f"{c.cycle},{_fmt(c.time_s)},{_fmt(c.tau0_ps)},{_fmt(c.dtau_ps)},"
                    f"{c.gated},{_fmt(c.delta_t_c)},{_fmt(c.epsilon_c)},"
                    f"{_fmt(c.correction_accum_c)},{_fmt(c.setpoint_c)}\n"
                )
        paths.append(p)

    p = out / "adev.csv"
    with open(p, "w", encoding="utf-8") as fh:
        fh.write("tau_s,adev,n_samples\n")
        for tau, a, n in zip(report.adev.taus_s, report.adev.adev, report.adev.n_samples):
            fh.write(f"{_fmt(tau)},{_fmt(a)},{int(n)}\n")
    paths.append(p)

    p = out / "drift_histogram.csv"
    with open(p, "w", encoding="utf-8") as fh:
        fh.write("bin_center_pm,count\n")
        for c, n in zip(report.summary.hist_bin_centers_pm, report.summary.hist_counts):
            fh.write(f"{_fmt(c)},{int(n)}\n")
    paths.append(p)

    summary = {
        "scenario": report.scenario,
        "seed": report.seed,
        "peak_to_peak_pm": report.summary.peak_to_peak_pm,
        "sd_pm": report.summary.sd_pm,
        "diagnostics": report.diagnostics,
        "calibration": None
        if report.calibration is None
        else dataclasses.asdict(report.calibration),
        "config": report.config,
    }
    p = out / "summary.json"
    with open(p, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths.append(p)
    return paths
