"""Drift statistics and overlapping Allan deviation for wavelength logs.

A wavelength series is converted to dimensionless fractional values

    y_i = (lambda_i - lambda_ref) / lambda_ref + 1

and characterized by the overlapping Allan deviation

    sigma_y(tau) = sqrt( 1 / (2 (M - 2m + 1)) * sum_k (ybar_{k+m} - ybar_k)^2 )

with tau = m * sample_interval, ybar_k the mean of y_k .. y_{k+m-1}, and
k running over all M - 2m + 1 overlapping positions. The implementation
uses the cumulative-sum (phase) form, which is algebraically identical
and O(N) per tau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "WavelengthSeries",
    "DriftSummary",
    "AdevCurve",
    "summarize",
    "allan_deviation",
    "default_taus",
    "fit_loglog_slope",
]


@dataclass(frozen=True)
class WavelengthSeries:
    """Uniformly sampled idler wavelength estimates.

    ``reference_nm`` fixes the normalization wavelength; when None the
    series mean is used.
    """

    sample_interval_s: float
    values_nm: np.ndarray
    reference_nm: float | None = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values_nm, dtype=float)
        object.__setattr__(self, "values_nm", values)
        if not (self.sample_interval_s > 0.0 and math.isfinite(self.sample_interval_s)):
            raise ValueError("sample_interval_s must be positive and finite")
        if values.ndim != 1 or len(values) < 2:
            raise ValueError("values_nm must be a 1-d array with >= 2 samples")
        if not np.all(np.isfinite(values)):
            raise ValueError("values_nm must be finite")
        if self.reference_nm is not None and not (
            self.reference_nm > 0.0 and math.isfinite(self.reference_nm)
        ):
            raise ValueError("reference_nm must be positive and finite")

    @property
    def reference(self) -> float:
        if self.reference_nm is not None:
            return self.reference_nm
        return float(self.values_nm.mean())

    @property
    def times_s(self) -> np.ndarray:
        return self.sample_interval_s * (1.0 + np.arange(len(self.values_nm)))


@dataclass(frozen=True)
class DriftSummary:
    """Peak-to-peak and RMS drift plus a deviation histogram (pm)."""

    peak_to_peak_pm: float
    sd_pm: float
    hist_bin_centers_pm: np.ndarray
    hist_counts: np.ndarray


def summarize(series: WavelengthSeries, bins: int = 51) -> DriftSummary:
    """Drift summary of a series; histogram is of deviations from mean."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    v = series.values_nm
    dev_pm = (v - v.mean()) * 1.0e3
    counts, edges = np.histogram(dev_pm, bins=bins)
    return DriftSummary(
        peak_to_peak_pm=float(v.max() - v.min()) * 1.0e3,
        sd_pm=float(v.std()) * 1.0e3,
        hist_bin_centers_pm=0.5 * (edges[:-1] + edges[1:]),
        hist_counts=counts,
    )


@dataclass(frozen=True)
class AdevCurve:
    """Overlapping Allan deviation on a set of averaging times."""

    taus_s: np.ndarray
    adev: np.ndarray
    n_samples: np.ndarray  # number of squared differences per tau

    def at_tau(self, tau_s: float) -> float:
        """ADEV at an exact grid point; KeyError when absent."""
        idx = np.nonzero(np.isclose(self.taus_s, tau_s, rtol=1e-12, atol=0.0))[0]
        if len(idx) == 0:
            raise KeyError(f"tau {tau_s} s not on the computed grid")
        return float(self.adev[idx[0]])


def default_taus(
    n_samples: int, sample_interval_s: float, per_decade: int = 10
) -> np.ndarray:
    """Log-spaced averaging times from one sample interval to N/3 samples.

    Grid points are integer multiples of the sample interval with about
    ``per_decade`` points per decade (duplicates removed), so round
    decades such as 10^3 samples are always included exactly.
    """
    if per_decade < 1:
        raise ValueError("per_decade must be >= 1")
    m_max = n_samples // 3
    if m_max < 1:
        raise ValueError("series too short for any averaging time")
    ms: list[int] = []
    j = 0
    while True:
        m = int(round(10.0 ** (j / per_decade)))
        if m > m_max:
            break
        if not ms or m != ms[-1]:
            ms.append(m)
        j += 1
    return sample_interval_s * np.asarray(ms, dtype=float)


def allan_deviation(series: WavelengthSeries, taus_s) -> AdevCurve:
    """Overlapping Allan deviation of the fractional wavelength series.

    Each tau must be an integer multiple of the sample interval. Taus
    without at least 3 non-overlapping segments of data are omitted from
    the returned curve.
    """
    taus = np.atleast_1d(np.asarray(taus_s, dtype=float))
    if len(taus) == 0:
        raise ValueError("taus_s must not be empty")
    t0 = series.sample_interval_s
    ref = series.reference
    y = (series.values_nm - ref) / ref
    # Constant offsets cancel in the second differences below; removing
    # the mean first keeps the accumulated phase small so the large-N
    # differences do not lose precision to cancellation.
    y = y - y.mean()
    n = len(y)
    # Phase form: x_j = t0 * sum of the first j fractional values.
    x = np.empty(n + 1)
    x[0] = 0.0
    np.cumsum(y, out=x[1:])
    x *= t0

    out_tau: list[float] = []
    out_adev: list[float] = []
    out_count: list[int] = []
    for tau in taus:
        m = int(round(tau / t0))
        if m < 1 or abs(tau - m * t0) > 1.0e-9 * t0:
            raise ValueError(f"tau {tau} s is not a multiple of the sample interval")
        if m > n // 3:
            continue  # fewer than 3 non-overlapping segments: omit
        d = x[2 * m :] - 2.0 * x[m : n + 1 - m] + x[: n + 1 - 2 * m]
        count = n - 2 * m + 1
        avar = float(np.dot(d, d)) / (2.0 * (m * t0) ** 2 * count)
        out_tau.append(m * t0)
        out_adev.append(math.sqrt(avar))
        out_count.append(count)
    return AdevCurve(
        taus_s=np.asarray(out_tau),
        adev=np.asarray(out_adev),
        n_samples=np.asarray(out_count, dtype=int),
    )


def fit_loglog_slope(
    curve: AdevCurve, tau_min_s: float | None = None, tau_max_s: float | None = None
) -> float:
    """Least-squares slope of log10(adev) vs log10(tau) over a tau range."""
    mask = np.ones(len(curve.taus_s), dtype=bool)
    if tau_min_s is not None:
        mask &= curve.taus_s >= tau_min_s
    if tau_max_s is not None:
        mask &= curve.taus_s <= tau_max_s
    mask &= curve.adev > 0.0
    if mask.sum() < 2:
        raise ValueError("need at least 2 positive ADEV points in range")
    coeff = np.polyfit(np.log10(curve.taus_s[mask]), np.log10(curve.adev[mask]), 1)
    return float(coeff[0])
