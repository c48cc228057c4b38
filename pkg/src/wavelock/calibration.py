"""Calibration of the dispersion and temperature tuning coefficients.

Two sweeps anchor the instrument scale:

* a narrowband optical filter stepped across the idler spectrum maps
  peak delay versus wavelength; the slope is the group-delay dispersion
  gdd (ps/nm);
* an oven temperature sweep maps peak delay versus setpoint; the slope
  (ps/degC) divided by gdd is the wavelength tuning coefficient
  dlambda/dT (nm/degC).

Both sweeps reduce to least-squares lines. Sweep points carry per-point
centroid uncertainties from the peak fit and the sweeps weight by them;
this matters for the filter sweep, whose outermost points see only a few
percent of the pair rate and would otherwise dominate the slope error
unaccounted. The combined result is stored as a small JSON record with
fixed keys.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dft import GaussianFit, HistogramWindowError

__all__ = [
    "CalibrationError",
    "LinearFitResult",
    "CalibrationRecord",
    "linear_fit",
    "weighted_linear_fit",
    "bandpass_rms",
    "calibrate_gdd",
    "TempCoefficientResult",
    "calibrate_temp_coefficient",
    "save_calibration",
    "load_calibration",
]


class CalibrationError(RuntimeError):
    """Calibration sweep could not produce a usable fit."""


@dataclass(frozen=True)
class LinearFitResult:
    """Ordinary least-squares line fit y = slope * x + intercept."""

    slope: float
    slope_stderr: float
    intercept: float
    intercept_stderr: float
    residual_rms: float
    n_points: int


def linear_fit(xs: Sequence[float], ys: Sequence[float]) -> LinearFitResult:
    """Unweighted OLS fit with residual-variance standard errors.

    Standard errors need at least 3 points (one residual degree of
    freedom); with exactly 2 points the fit is exact and stderr is 0.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be 1-d arrays of equal length")
    n = len(x)
    if n < 2:
        raise ValueError("need at least 2 points")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("xs and ys must be finite")
    xbar = x.mean()
    sxx = float(np.sum((x - xbar) ** 2))
    if sxx <= 0.0:
        raise ValueError("xs must not be all identical")
    ybar = y.mean()
    slope = float(np.sum((x - xbar) * (y - ybar)) / sxx)
    intercept = ybar - slope * xbar
    resid = y - (slope * x + intercept)
    ssr = float(np.sum(resid * resid))
    if n > 2:
        s2 = ssr / (n - 2)
        slope_se = math.sqrt(s2 / sxx)
        intercept_se = math.sqrt(s2 * (1.0 / n + xbar * xbar / sxx))
    else:
        slope_se = 0.0
        intercept_se = 0.0
    return LinearFitResult(
        slope=slope,
        slope_stderr=slope_se,
        intercept=float(intercept),
        intercept_stderr=intercept_se,
        residual_rms=math.sqrt(ssr / n),
        n_points=n,
    )


def weighted_linear_fit(
    xs: Sequence[float],
    ys: Sequence[float],
    sigmas: Sequence[float],
) -> LinearFitResult:
    """Least-squares line with known per-point standard errors.

    Points are weighted by 1/sigma**2 and the parameter standard errors
    come from the supplied sigmas rather than the residual scatter, so
    they stay honest when the noise varies across the sweep and remain
    defined even for an exact 2-point fit. ``residual_rms`` is still the
    unweighted residual rms, as in :func:`linear_fit`.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    s = np.asarray(sigmas, dtype=float)
    if not (x.shape == y.shape == s.shape) or x.ndim != 1:
        raise ValueError("xs, ys and sigmas must be 1-d arrays of equal length")
    if len(x) < 2:
        raise ValueError("need at least 2 points")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("xs and ys must be finite")
    if not np.all(np.isfinite(s) & (s > 0.0)):
        raise ValueError("sigmas must be finite and positive")
    w = 1.0 / (s * s)
    wsum = float(w.sum())
    xw = float(np.sum(w * x) / wsum)
    yw = float(np.sum(w * y) / wsum)
    sxx = float(np.sum(w * (x - xw) ** 2))
    if sxx <= 0.0:
        raise ValueError("xs must not be all identical")
    slope = float(np.sum(w * (x - xw) * (y - yw)) / sxx)
    intercept = yw - slope * xw
    resid = y - (slope * x + intercept)
    return LinearFitResult(
        slope=slope,
        slope_stderr=math.sqrt(1.0 / sxx),
        intercept=intercept,
        intercept_stderr=math.sqrt(1.0 / wsum + xw * xw / sxx),
        residual_rms=math.sqrt(float(np.mean(resid * resid))),
        n_points=len(x),
    )


def bandpass_rms(full_width_nm: float) -> float:
    """Gaussian-equivalent RMS width of a rectangular bandpass filter."""
    if not (full_width_nm > 0.0):
        raise ValueError("full_width_nm must be positive")
    return full_width_nm / math.sqrt(12.0)


def _sweep_points(measure, values) -> tuple[list[float], list[float], list[float]]:
    """Run one sweep, dropping points whose measurement fails.

    Returns sweep values, fitted peak delays and their standard errors.
    """
    kept_x: list[float] = []
    kept_y: list[float] = []
    kept_se: list[float] = []
    for v in values:
        try:
            fit: GaussianFit = measure(v)
        except HistogramWindowError:
            continue
        if not fit.converged:
            continue
        kept_x.append(float(v))
        kept_y.append(fit.tau0_ps)
        kept_se.append(fit.tau0_stderr_ps)
    return kept_x, kept_y, kept_se


def calibrate_gdd(
    sim,
    sweep_centers_nm: Sequence[float],
    filter_rms_nm: float,
) -> LinearFitResult:
    """Dispersion calibration from a narrowband filter sweep.

    ``sim`` must provide ``measure_filtered(center_nm, rms_nm)`` that
    returns a GaussianFit of the filtered coincidence peak. Sweep points
    that land outside the instrument window or fail to fit are dropped;
    at least 3 surviving points are required. Points are weighted by
    their fitted centroid standard errors, which differ strongly across
    the sweep because the filter passes much less light at the spectrum
    edges.
    """
    if len(sweep_centers_nm) < 3:
        raise CalibrationError("need at least 3 sweep wavelengths")
    xs, ys, ses = _sweep_points(
        lambda c: sim.measure_filtered(c, filter_rms_nm), sweep_centers_nm
    )
    if len(xs) < 3:
        raise CalibrationError(
            f"only {len(xs)} of {len(sweep_centers_nm)} sweep points usable"
        )
    return weighted_linear_fit(xs, ys, ses)


@dataclass(frozen=True)
class TempCoefficientResult:
    """Temperature sweep outcome and the derived tuning coefficient."""

    slope_ps_per_c: float
    slope_stderr: float
    dlambda_dt_nm_per_c: float
    dlambda_dt_stderr: float
    n_points: int


def calibrate_temp_coefficient(
    sim,
    temps_c: Sequence[float],
    gdd_ps_per_nm: float,
    gdd_stderr: float = 0.0,
) -> TempCoefficientResult:
    """Temperature-tuning calibration against a known dispersion.

    ``sim`` must provide ``measure_at_temperature(temp_c)`` returning a
    GaussianFit. The tuning coefficient is slope/gdd with first-order
    uncertainty propagation from both stderr terms.
    """
    if len(temps_c) < 3:
        raise CalibrationError("need at least 3 sweep temperatures")
    if gdd_ps_per_nm == 0.0 or not math.isfinite(gdd_ps_per_nm):
        raise CalibrationError("gdd_ps_per_nm must be finite and nonzero")
    xs, ys, ses = _sweep_points(sim.measure_at_temperature, temps_c)
    if len(xs) < 3:
        raise CalibrationError(f"only {len(xs)} of {len(temps_c)} sweep points usable")
    fit = weighted_linear_fit(xs, ys, ses)
    dldt = fit.slope / gdd_ps_per_nm
    dldt_se = propagate_ratio_stderr(fit.slope, fit.slope_stderr, gdd_ps_per_nm, gdd_stderr)
    return TempCoefficientResult(
        slope_ps_per_c=fit.slope,
        slope_stderr=fit.slope_stderr,
        dlambda_dt_nm_per_c=dldt,
        dlambda_dt_stderr=dldt_se,
        n_points=fit.n_points,
    )


def propagate_ratio_stderr(num: float, num_se: float, den: float, den_se: float) -> float:
    """First-order stderr of num/den from independent stderr terms."""
    if num == 0.0:
        return abs(num_se / den)
    return abs(num / den) * math.sqrt((num_se / num) ** 2 + (den_se / den) ** 2)


@dataclass(frozen=True)
class CalibrationRecord:
    """Persisted instrument constants produced by the two sweeps."""

    gdd_ps_per_nm: float
    gdd_stderr: float
    slope_t_ps_per_c: float
    slope_t_stderr: float
    dlambda_dt_nm_per_c: float
    dlambda_dt_stderr: float

    def __post_init__(self) -> None:
        if self.gdd_ps_per_nm == 0.0 or not math.isfinite(self.gdd_ps_per_nm):
            raise ValueError("gdd_ps_per_nm must be finite and nonzero")
        for name in ("gdd_stderr", "slope_t_stderr", "dlambda_dt_stderr"):
            if not (getattr(self, name) >= 0.0):
                raise ValueError(f"{name} must be >= 0")


_RECORD_KEYS = {
    "D_ps_per_nm": "gdd_ps_per_nm",
    "D_stderr": "gdd_stderr",
    "slopeT_ps_per_C": "slope_t_ps_per_c",
    "slopeT_stderr": "slope_t_stderr",
    "dlambda_dT_nm_per_C": "dlambda_dt_nm_per_c",
    "dlambda_dT_stderr": "dlambda_dt_stderr",
}


def save_calibration(record: CalibrationRecord, path) -> None:
    """Write the record as a small JSON file with fixed keys."""
    payload = {key: getattr(record, attr) for key, attr in _RECORD_KEYS.items()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_calibration(path) -> CalibrationRecord:
    """Read a record written by :func:`save_calibration`."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    missing = set(_RECORD_KEYS) - set(payload)
    if missing:
        raise CalibrationError(f"calibration file missing keys: {sorted(missing)}")
    extra = set(payload) - set(_RECORD_KEYS)
    if extra:
        raise CalibrationError(f"calibration file has unknown keys: {sorted(extra)}")
    kwargs = {attr: float(payload[key]) for key, attr in _RECORD_KEYS.items()}
    return CalibrationRecord(**kwargs)
