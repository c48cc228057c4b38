"""Coincidence-histogram synthesis and Gaussian centroid recovery.

The dispersive fiber maps idler wavelength onto arrival-time delay, so
the coincidence peak in the start-stop histogram is a Gaussian whose
center moves linearly with the idler center wavelength:

    tau0  = gdd * lambda_i + tau_s
    delta = |gdd| * sigma_i / sqrt(2)

where gdd is the accumulated group-delay dispersion (ps/nm) and delta is
the RMS width of the correlation peak. Expected per-bin counts are exact
Gaussian bin integrals plus a flat accidental floor; sampled histograms
apply independent Poisson noise per bin. Centroids are recovered with a
damped least-squares fit of a Gaussian plus constant baseline, and
centroid shifts convert back to wavelength shifts through gdd.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit
from scipy.special import ndtr

__all__ = [
    "DftChain",
    "ExpectedProfile",
    "CoincidenceHistogram",
    "GaussianFit",
    "HistogramWindowError",
    "peak_rms_width",
    "predict_tau0",
    "expected_profile",
    "sample_histogram",
    "fit_gaussian",
    "tau_shift_to_wavelength_shift",
    "histogram_to_csv",
]

# Window must keep the expected centroid at least this many peak widths
# away from either edge; beyond that the truncated tail is < 0.01% and a
# moment-seeded fit is safe.
_EDGE_MARGIN_WIDTHS = 4.0


class HistogramWindowError(ValueError):
    """Measurement window cannot contain the expected peak."""


@dataclass(frozen=True)
class DftChain:
    """Static parameters of the dispersion + timing measurement chain.

    ``window_ps`` is the histogram span relative to the window center
    chosen for each measurement (the instrument re-centers its span on
    the expected peak position).
    """

    gdd_ps_per_nm: float = 335.17
    tau_s_ps: float = 0.0
    bin_width_ps: float = 1.0
    window_ps: tuple[float, float] = (-1600.0, 1600.0)
    pair_rate_hz: float = 1.0e4
    accidental_rate_hz_per_bin: float = 1.0e-2
    integration_time_s: float = 10.0
    min_total_counts: float = 1000.0

    def __post_init__(self) -> None:
        if self.gdd_ps_per_nm == 0.0 or not math.isfinite(self.gdd_ps_per_nm):
            raise ValueError("gdd_ps_per_nm must be finite and nonzero")
        if not (self.bin_width_ps > 0.0):
            raise ValueError("bin_width_ps must be positive")
        lo, hi = self.window_ps
        if not (hi > lo):
            raise ValueError("window_ps must satisfy lo < hi")
        if not (self.pair_rate_hz >= 0.0 and self.accidental_rate_hz_per_bin >= 0.0):
            raise ValueError("rates must be >= 0")
        if not (self.integration_time_s > 0.0):
            raise ValueError("integration_time_s must be positive")
        if not (self.min_total_counts >= 0.0):
            raise ValueError("min_total_counts must be >= 0")
        if not math.isfinite(self.tau_s_ps):
            raise ValueError("tau_s_ps must be finite")


def peak_rms_width(chain: DftChain, sigma_i_nm: float) -> float:
    """RMS width of the correlation peak for a source of RMS width sigma_i."""
    if not (sigma_i_nm > 0.0):
        raise ValueError("sigma_i_nm must be positive")
    return abs(chain.gdd_ps_per_nm) * sigma_i_nm / math.sqrt(2.0)


def predict_tau0(chain: DftChain, lambda_i_nm: float) -> float:
    """Expected peak center for a given idler center wavelength."""
    return chain.gdd_ps_per_nm * lambda_i_nm + chain.tau_s_ps


@dataclass(frozen=True)
class ExpectedProfile:
    """Per-bin expected counts over a concrete histogram window."""

    bin_edges_ps: np.ndarray
    mean_counts: np.ndarray
    integration_time_s: float

    @property
    def bin_centers_ps(self) -> np.ndarray:
        return 0.5 * (self.bin_edges_ps[:-1] + self.bin_edges_ps[1:])


@dataclass(frozen=True)
class CoincidenceHistogram:
    """A recorded (or synthetic noiseless) coincidence histogram.

    Sampled histograms carry integer counts; noiseless synthetic ones may
    carry the real-valued expectations directly.
    """

    bin_edges_ps: np.ndarray
    counts: np.ndarray
    integration_time_s: float

    def __post_init__(self) -> None:
        if len(self.bin_edges_ps) != len(self.counts) + 1:
            raise ValueError("bin_edges_ps must have len(counts)+1 entries")
        if np.any(~np.isfinite(self.counts)) or np.any(self.counts < 0):
            raise ValueError("counts must be finite and >= 0")

    @property
    def bin_centers_ps(self) -> np.ndarray:
        return 0.5 * (self.bin_edges_ps[:-1] + self.bin_edges_ps[1:])


def expected_profile(
    chain: DftChain,
    lambda_i_nm: float,
    sigma_i_nm: float,
    window_center_ps: float,
    rate_scale: float = 1.0,
) -> ExpectedProfile:
    """Expected histogram for a Gaussian idler spectrum.

    Args:
        chain: measurement-chain parameters.
        lambda_i_nm: idler center wavelength.
        sigma_i_nm: RMS spectral width reaching the dispersive fiber.
        window_center_ps: absolute delay the window is centered on.
        rate_scale: multiplies the pair rate (spectral filtering losses).

    Returns:
        ExpectedProfile with exact Gaussian bin integrals plus the flat
        accidental floor.

    Raises:
        HistogramWindowError: expected centroid closer than 4 peak widths
            to either window edge (or outside the window entirely).
    """
    if not (0.0 <= rate_scale <= 1.0):
        raise ValueError("rate_scale must be within [0, 1]")
    tau0 = predict_tau0(chain, lambda_i_nm)
    delta = peak_rms_width(chain, sigma_i_nm)
    lo = window_center_ps + chain.window_ps[0]
    hi = window_center_ps + chain.window_ps[1]
    margin = _EDGE_MARGIN_WIDTHS * delta
    if not (lo + margin <= tau0 <= hi - margin):
        raise HistogramWindowError(
            f"expected centroid {tau0:.1f} ps within {margin:.1f} ps of the "
            f"window [{lo:.1f}, {hi:.1f}] ps edge"
        )

    n_bins = int(round((hi - lo) / chain.bin_width_ps))
    edges = lo + chain.bin_width_ps * np.arange(n_bins + 1)
    signal_total = rate_scale * chain.pair_rate_hz * chain.integration_time_s
    cdf = ndtr((edges - tau0) / delta)
    mu = signal_total * np.diff(cdf)
    mu += chain.accidental_rate_hz_per_bin * chain.integration_time_s
    return ExpectedProfile(
        bin_edges_ps=edges, mean_counts=mu, integration_time_s=chain.integration_time_s
    )


def sample_histogram(
    profile: ExpectedProfile, rng: np.random.Generator
) -> CoincidenceHistogram:
    """Poisson-sample one histogram realization (independent per bin)."""
    counts = rng.poisson(profile.mean_counts)
    return CoincidenceHistogram(
        bin_edges_ps=profile.bin_edges_ps,
        counts=counts,
        integration_time_s=profile.integration_time_s,
    )


@dataclass(frozen=True)
class GaussianFit:
    """Result of the Gaussian + baseline fit.

    ``converged`` False means no usable peak; numeric fields are NaN in
    that case and must not be consumed downstream.
    """

    tau0_ps: float
    tau0_stderr_ps: float
    delta_ps: float
    delta_stderr_ps: float
    amplitude: float
    baseline: float
    converged: bool
    reduced_residual: float

    @staticmethod
    def failed() -> "GaussianFit":
        nan = float("nan")
        return GaussianFit(nan, nan, nan, nan, nan, nan, False, nan)


def _gauss_baseline(x: np.ndarray, amp: float, mu: float, sd: float, base: float) -> np.ndarray:
    return amp * np.exp(-0.5 * ((x - mu) / sd) ** 2) + base


def _gauss_baseline_jac(x: np.ndarray, amp: float, mu: float, sd: float, base: float) -> np.ndarray:
    u = (x - mu) / sd
    e = np.exp(-0.5 * u * u)
    return np.stack([e, amp * e * u / sd, amp * e * u * u / sd, np.ones_like(x)], axis=1)


def fit_gaussian(hist: CoincidenceHistogram, min_total_counts: float = 1000.0) -> GaussianFit:
    """Fit Gaussian + constant baseline to a coincidence histogram.

    Damped least squares with Poisson weights taken from the moment-based
    initial model rather than the raw counts (weighting by observed
    counts overweights downward fluctuations and biases the width a few
    percent low). Returns the failure value instead of raising when the
    histogram holds no significant peak (too few counts, a flat profile,
    or a non-converging fit).
    """
    centers = hist.bin_centers_ps
    counts = np.asarray(hist.counts, dtype=float)
    total = counts.sum()
    if total < min_total_counts or len(counts) < 8:
        return GaussianFit.failed()

    base0 = float(np.median(counts))
    excess = np.clip(counts - base0, 0.0, None)
    excess_total = excess.sum()
    if excess_total <= 0.0:
        return GaussianFit.failed()
    mu0 = float(np.sum(centers * excess) / excess_total)
    var0 = float(np.sum(excess * (centers - mu0) ** 2) / excess_total)
    span = hist.bin_edges_ps[-1] - hist.bin_edges_ps[0]
    sd0 = min(max(math.sqrt(max(var0, 0.0)), hist.bin_edges_ps[1] - hist.bin_edges_ps[0]), span / 4.0)
    amp0 = max(float(counts.max()) - base0, 1.0)

    sigma = np.sqrt(np.maximum(_gauss_baseline(centers, amp0, mu0, sd0, base0), 1.0))
    try:
        popt, pcov = curve_fit(
            _gauss_baseline,
            centers,
            counts,
            p0=[amp0, mu0, sd0, base0],
            sigma=sigma,
            absolute_sigma=True,
            jac=_gauss_baseline_jac,
            maxfev=4000,
        )
    except (RuntimeError, ValueError):
        return GaussianFit.failed()

    amp, mu, sd, base = popt
    sd = abs(sd)
    stderr = np.sqrt(np.abs(np.diag(pcov)))
    if not (np.all(np.isfinite(popt)) and np.all(np.isfinite(stderr))):
        return GaussianFit.failed()
    # Reject fits that are not a real peak: negative or insignificant
    # amplitude, width degenerate with the binning or the whole window,
    # or a center that left the measured span.
    if amp <= 0.0 or amp < 3.0 * stderr[0]:
        return GaussianFit.failed()
    if not (hist.bin_edges_ps[0] < mu < hist.bin_edges_ps[-1]):
        return GaussianFit.failed()
    if not (0.25 * (hist.bin_edges_ps[1] - hist.bin_edges_ps[0]) < sd < span / 2.0):
        return GaussianFit.failed()

    resid = (counts - _gauss_baseline(centers, *popt)) / sigma
    dof = max(len(counts) - 4, 1)
    return GaussianFit(
        tau0_ps=float(mu),
        tau0_stderr_ps=float(stderr[1]),
        delta_ps=float(sd),
        delta_stderr_ps=float(stderr[2]),
        amplitude=float(amp),
        baseline=float(base),
        converged=True,
        reduced_residual=float(np.sum(resid * resid) / dof),
    )


def tau_shift_to_wavelength_shift(dtau_ps: float, chain: DftChain) -> float:
    """Convert a centroid delay shift to an idler wavelength shift (nm)."""
    return dtau_ps / chain.gdd_ps_per_nm


def histogram_to_csv(hist: CoincidenceHistogram, path) -> None:
    """Write one histogram as ``bin_center_ps,count`` rows (9 sig digits)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("bin_center_ps,count\n")
        for c, n in zip(hist.bin_centers_ps, hist.counts):
            fh.write(f"{format(float(c), '.9g')},{format(float(n), '.9g')}\n")
