"""Tests for drift statistics and the overlapping Allan deviation."""

import math

import numpy as np
import pytest

from wavelock.stability import (
    AdevCurve,
    WavelengthSeries,
    allan_deviation,
    default_taus,
    fit_loglog_slope,
    summarize,
)

REF = 1560.0


def naive_overlapping_adev(y, m):
    """Definitional estimator: every windowed mean computed directly."""
    n = len(y)
    ybar = np.array([y[k : k + m].mean() for k in range(n - m + 1)])
    d = ybar[m:] - ybar[:-m]
    return math.sqrt(0.5 * float(np.mean(d * d))), len(d)


def series_from_fractional(y, dt=10.0, reference=REF):
    return WavelengthSeries(dt, REF * (1.0 + np.asarray(y)), reference_nm=reference)


def test_summary_of_alternating_series():
    values = REF + 1e-3 * np.array([-1.0, 1.0] * 50)  # +-1 pm
    s = summarize(WavelengthSeries(10.0, values), bins=11)
    assert s.sd_pm == pytest.approx(1.0, rel=1e-10)
    assert s.peak_to_peak_pm == pytest.approx(2.0, rel=1e-10)
    assert s.hist_counts.sum() == 100
    assert len(s.hist_bin_centers_pm) == 11


def test_constant_series_has_zero_spread_and_zero_adev():
    series = WavelengthSeries(10.0, np.full(64, REF))
    s = summarize(series)
    assert s.sd_pm == 0.0
    assert s.peak_to_peak_pm == 0.0
    curve = allan_deviation(series, default_taus(64, 10.0))
    assert np.all(curve.adev == 0.0)


def test_three_sample_hand_case():
    series = series_from_fractional([0.0, 1e-6, 0.0])
    curve = allan_deviation(series, [10.0])
    # two overlapping first differences of adjacent one-sample means,
    # +1e-6 and -1e-6: adev = sqrt(mean(d^2)/2) = 1e-6/sqrt(2)
    assert curve.adev[0] == pytest.approx(1e-6 / math.sqrt(2.0), rel=1e-9)
    assert curve.n_samples[0] == 2


def test_white_noise_follows_inverse_sqrt_tau():
    rng = np.random.default_rng(42)
    sigma = 2e-6
    series = series_from_fractional(sigma * rng.standard_normal(100000))
    curve = allan_deviation(series, [10.0, 100.0, 1000.0])
    for tau, tol in ((10.0, 0.01), (100.0, 0.03), (1000.0, 0.08)):
        m = tau / 10.0
        assert curve.at_tau(tau) == pytest.approx(sigma / math.sqrt(m), rel=tol)


def test_linear_drift_response_is_exact():
    rate = 3e-9  # fractional per second
    k = np.arange(1, 5001)
    series = series_from_fractional(rate * 10.0 * k)
    curve = allan_deviation(series, [10.0, 130.0, 1000.0])
    for tau in (10.0, 130.0, 1000.0):
        assert curve.at_tau(tau) == pytest.approx(rate * tau / math.sqrt(2.0), rel=1e-9)


def test_matches_definitional_estimator_on_random_series():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = int(rng.integers(50, 400))
        y = np.cumsum(1e-7 * rng.standard_normal(n)) + 1e-6 * rng.standard_normal(n)
        series = series_from_fractional(y)
        taus = default_taus(n, 10.0)
        curve = allan_deviation(series, taus)
        for tau, got, count in zip(curve.taus_s, curve.adev, curve.n_samples):
            want, want_count = naive_overlapping_adev(y, int(round(tau / 10.0)))
            assert count == want_count
            assert got == pytest.approx(want, rel=1e-12)


def test_additive_offset_leaves_adev_unchanged():
    rng = np.random.default_rng(9)
    values = REF + 1e-3 * rng.standard_normal(2000)
    taus = default_taus(2000, 10.0)
    a = allan_deviation(WavelengthSeries(10.0, values, reference_nm=REF), taus)
    b = allan_deviation(WavelengthSeries(10.0, values + 0.5, reference_nm=REF), taus)
    assert b.adev == pytest.approx(a.adev, rel=1e-9)


def test_tau_grid_validation():
    series = series_from_fractional(np.zeros(100))
    with pytest.raises(ValueError):
        allan_deviation(series, [15.0])  # not a multiple of the sample interval
    curve = allan_deviation(series, [10.0, 1e6])  # overlong tau is dropped
    assert list(curve.taus_s) == [10.0]


def test_default_tau_grid_shape():
    taus = default_taus(5040, 10.0)
    ms = taus / 10.0
    assert taus[0] == 10.0
    assert taus[-1] <= 5040 // 3 * 10.0
    assert np.all(np.diff(taus) > 0)
    assert np.all(ms == np.round(ms))
    assert 10000.0 in taus
    assert list(default_taus(5, 10.0)) == [10.0]
    with pytest.raises(ValueError):
        default_taus(2, 10.0)


def test_at_tau_lookup():
    curve = AdevCurve(
        taus_s=np.array([10.0, 20.0]),
        adev=np.array([1e-6, 7e-7]),
        n_samples=np.array([98, 96]),
    )
    assert curve.at_tau(20.0) == 7e-7
    with pytest.raises(KeyError):
        curve.at_tau(30.0)


def test_loglog_slope_fit():
    taus = np.array([10.0, 20.0, 50.0, 100.0, 200.0, 500.0])
    curve = AdevCurve(
        taus_s=taus, adev=3e-6 * taus**-0.5, n_samples=np.full(len(taus), 100)
    )
    assert fit_loglog_slope(curve) == pytest.approx(-0.5, abs=1e-12)
    mixed = AdevCurve(
        taus_s=taus,
        adev=np.where(taus <= 100.0, 3e-6 * taus**-0.5, 1e-7 * taus**0.5),
        n_samples=np.full(len(taus), 100),
    )
    assert fit_loglog_slope(mixed, tau_max_s=100.0) == pytest.approx(-0.5, abs=1e-12)
    assert fit_loglog_slope(mixed, tau_min_s=200.0) == pytest.approx(0.5, abs=1e-12)


def test_series_validation_and_times():
    with pytest.raises(ValueError):
        WavelengthSeries(0.0, np.ones(10) * REF)
    with pytest.raises(ValueError):
        WavelengthSeries(10.0, np.array([REF]))
    with pytest.raises(ValueError):
        WavelengthSeries(10.0, np.array([REF, math.nan]))
    series = WavelengthSeries(10.0, np.full(5, REF))
    assert series.times_s[0] == 10.0
    assert series.times_s[-1] == 50.0
    assert series.reference == REF
