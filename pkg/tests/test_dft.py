"""Tests for the dispersive timing chain and histogram peak fitting."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from wavelock.dft import (
    CoincidenceHistogram,
    DftChain,
    ExpectedProfile,
    HistogramWindowError,
    expected_profile,
    fit_gaussian,
    histogram_to_csv,
    peak_rms_width,
    predict_tau0,
    sample_histogram,
    tau_shift_to_wavelength_shift,
)

SIGMA_I = 1.5  # nm, idler marginal RMS width used throughout


def test_peak_width_follows_dispersion_and_bandwidth():
    chain = DftChain()
    w = peak_rms_width(chain, SIGMA_I)
    # biphoton timing correlation halves the mapped spectral variance
    assert w == pytest.approx(abs(chain.gdd_ps_per_nm) * SIGMA_I / math.sqrt(2.0), rel=1e-12)
    assert w == pytest.approx(355.5015, abs=1e-3)


def test_predicted_centroid_is_linear_in_wavelength():
    chain = DftChain(tau_s_ps=25.0)
    assert predict_tau0(chain, 1560.0) == pytest.approx(335.17 * 1560.0 + 25.0, rel=1e-12)


def test_expected_profile_matches_numerical_integration():
    chain = DftChain()
    center = predict_tau0(chain, 1560.0)
    prof = expected_profile(chain, 1560.0, SIGMA_I, center)
    width = peak_rms_width(chain, SIGMA_I)
    norm = chain.pair_rate_hz / (width * math.sqrt(2.0 * math.pi))

    def density(t):
        return norm * math.exp(-0.5 * ((t - center) / width) ** 2)

    floor = chain.accidental_rate_hz_per_bin * chain.integration_time_s
    for offset_widths in (0.0, 1.0, 3.5):
        k = int(np.searchsorted(prof.bin_edges_ps, center + offset_widths * width)) - 1
        lo, hi = prof.bin_edges_ps[k], prof.bin_edges_ps[k + 1]
        want = quad(density, lo, hi)[0] * chain.integration_time_s + floor
        assert prof.mean_counts[k] == pytest.approx(want, rel=1e-9)


def test_expected_profile_conserves_total_rate():
    chain = DftChain()
    prof = expected_profile(chain, 1560.0, SIGMA_I, predict_tau0(chain, 1560.0))
    floor = chain.accidental_rate_hz_per_bin * chain.integration_time_s
    signal = prof.mean_counts.sum() - floor * len(prof.mean_counts)
    expect = chain.pair_rate_hz * chain.integration_time_s
    # only the tail mass beyond the +-1600 ps window may be missing
    assert signal < expect
    assert signal == pytest.approx(expect, rel=2e-4)


def test_peak_too_close_to_window_edge_is_refused():
    chain = DftChain()
    center = predict_tau0(chain, 1560.0)
    with pytest.raises(HistogramWindowError):
        expected_profile(chain, 1560.0, SIGMA_I, center + 400.0)


def test_fit_recovers_noiseless_peak():
    chain = DftChain()
    window_center = predict_tau0(chain, 1560.0)
    prof = expected_profile(chain, 1560.3, SIGMA_I, window_center)
    hist = CoincidenceHistogram(prof.bin_edges_ps, prof.mean_counts, prof.integration_time_s)
    fit = fit_gaussian(hist)
    assert fit.converged
    assert fit.tau0_ps == pytest.approx(predict_tau0(chain, 1560.3), abs=1e-6)
    assert fit.delta_ps == pytest.approx(peak_rms_width(chain, SIGMA_I), abs=1e-3)
    assert fit.baseline == pytest.approx(0.1, abs=1e-3)


def test_wavelength_round_trip_through_delay_shift():
    chain = DftChain()
    window_center = predict_tau0(chain, 1560.0)
    fits = []
    for lam in (1560.0, 1560.25):
        prof = expected_profile(chain, lam, SIGMA_I, window_center)
        hist = CoincidenceHistogram(prof.bin_edges_ps, prof.mean_counts, prof.integration_time_s)
        fits.append(fit_gaussian(hist))
    dlam = tau_shift_to_wavelength_shift(fits[1].tau0_ps - fits[0].tau0_ps, chain)
    assert dlam == pytest.approx(0.25, abs=1e-9)


def test_sampling_is_deterministic_and_unbiased():
    chain = DftChain()
    prof = expected_profile(chain, 1560.0, SIGMA_I, predict_tau0(chain, 1560.0))
    h1 = sample_histogram(prof, np.random.default_rng(5))
    h2 = sample_histogram(prof, np.random.default_rng(5))
    assert np.array_equal(h1.counts, h2.counts)
    assert np.all(h1.counts == np.round(h1.counts))
    expect = prof.mean_counts.sum()
    assert abs(h1.counts.sum() - expect) < 5.0 * math.sqrt(expect)


def test_fit_refuses_featureless_histogram():
    edges = np.arange(-1600.0, 1601.0, 1.0)
    counts = np.random.default_rng(8).poisson(100.0, size=len(edges) - 1).astype(float)
    fit = fit_gaussian(CoincidenceHistogram(edges, counts, 10.0))
    assert not fit.converged
    assert math.isnan(fit.tau0_ps)


def test_fit_refuses_starved_histogram():
    chain = DftChain()
    prof = expected_profile(chain, 1560.0, SIGMA_I, predict_tau0(chain, 1560.0))
    starved = ExpectedProfile(prof.bin_edges_ps, prof.mean_counts * 1e-3, prof.integration_time_s)
    hist = sample_histogram(starved, np.random.default_rng(9))
    assert not fit_gaussian(hist).converged


@pytest.mark.parametrize("sigma_i", [1.0, 1.2, 1.5])
def test_fitted_width_tracks_source_bandwidth(sigma_i):
    chain = DftChain()
    prof = expected_profile(chain, 1560.0, sigma_i, predict_tau0(chain, 1560.0))
    fit = fit_gaussian(sample_histogram(prof, np.random.default_rng(17)))
    assert fit.converged
    assert fit.delta_ps == pytest.approx(peak_rms_width(chain, sigma_i), rel=0.02)


def test_centroid_estimator_bias_and_reported_error():
    chain = DftChain()
    truth = predict_tau0(chain, 1560.0)
    prof = expected_profile(chain, 1560.0, SIGMA_I, truth)
    rng = np.random.default_rng(31)
    est, err = [], []
    for _ in range(200):
        fit = fit_gaussian(sample_histogram(prof, rng))
        assert fit.converged
        est.append(fit.tau0_ps)
        err.append(fit.tau0_stderr_ps)
    est = np.asarray(est)
    scatter = est.std(ddof=1)
    assert abs(est.mean() - truth) < 4.0 * scatter / math.sqrt(len(est))
    # reported stderr consistent with the observed scatter
    assert np.mean(err) == pytest.approx(scatter, rel=0.25)


def test_delay_to_wavelength_conversion():
    chain = DftChain()
    assert tau_shift_to_wavelength_shift(335.17, chain) == pytest.approx(1.0, rel=1e-12)
    assert tau_shift_to_wavelength_shift(3.3517, chain) == pytest.approx(0.010, rel=1e-12)


def test_histogram_csv_schema(tmp_path):
    chain = DftChain()
    prof = expected_profile(chain, 1560.0, SIGMA_I, predict_tau0(chain, 1560.0))
    hist = sample_histogram(prof, np.random.default_rng(2))
    path = tmp_path / "hist.csv"
    histogram_to_csv(hist, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "bin_center_ps,count"
    assert len(lines) == 1 + len(hist.counts)
    first_center, first_count = lines[1].split(",")
    assert float(first_center) == pytest.approx(hist.bin_centers_ps[0])
    assert float(first_count) == hist.counts[0]


def test_chain_validation():
    with pytest.raises(ValueError):
        DftChain(gdd_ps_per_nm=0.0)
    with pytest.raises(ValueError):
        DftChain(bin_width_ps=0.0)
    with pytest.raises(ValueError):
        DftChain(window_ps=(100.0, -100.0))
    with pytest.raises(ValueError):
        DftChain(integration_time_s=0.0)
