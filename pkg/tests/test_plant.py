"""Tests for the oven plant and pump drift models."""

import math

import numpy as np
import pytest

from wavelock.plant import (
    PumpModel,
    ThermalPlantParams,
    WaveguideModel,
    idler_center_wavelength,
    initial_plant_state,
    step_plant,
    step_pump,
)

# all disturbance channels off
QUIET = ThermalPlantParams(
    tec_noise_rms_c=0.0, relax_amplitude_c=0.0, ou_sigma_c=0.0
)


def advance(params, state, setpoint, dts, rng):
    for dt in dts:
        state = step_plant(state, params, dt, setpoint, rng)
    return state


def test_equilibrium_is_a_fixed_point():
    rng = np.random.default_rng(0)
    state = initial_plant_state(QUIET, 31.5)
    state = advance(QUIET, state, 31.5, [10.0] * 50, rng)
    assert state.t_tec_c == 31.5
    assert state.delta_t_c == 0.0
    assert state.t_s == pytest.approx(500.0)


def test_tec_relaxes_exponentially_toward_setpoint():
    state = initial_plant_state(QUIET, 35.0)
    state = step_plant(state, QUIET, 5.0, 31.5, np.random.default_rng(0))
    # one TEC time constant: the 3.5 degC offset decays by exactly 1/e
    assert state.t_tec_c == pytest.approx(31.5 + 3.5 / math.e, rel=1e-12)


def test_gradient_relaxation_decays_by_one_e_fold():
    params = ThermalPlantParams(
        tec_noise_rms_c=0.0, relax_amplitude_c=0.6, relax_tau_s=18000.0, ou_sigma_c=0.0
    )
    state = initial_plant_state(params, 31.5)
    assert state.relax_c == 0.6
    assert state.delta_t_c == 0.6
    fine = advance(params, state, 31.5, [10.0] * 1800, np.random.default_rng(1))
    coarse = step_plant(state, params, 18000.0, 31.5, np.random.default_rng(2))
    assert fine.relax_c == pytest.approx(0.6 / math.e, rel=1e-12)
    assert coarse.relax_c == pytest.approx(0.6 / math.e, rel=1e-12)
    assert fine.delta_t_c == pytest.approx(coarse.delta_t_c, rel=1e-12)


def test_ou_wander_reaches_stationary_spread():
    params = ThermalPlantParams(
        tec_noise_rms_c=0.0, relax_amplitude_c=0.0, ou_sigma_c=0.02, ou_tau_s=1000.0
    )
    rng = np.random.default_rng(7)
    finals = []
    for _ in range(4000):
        state = initial_plant_state(params, 31.5)
        state = advance(params, state, 31.5, [100.0] * 30, rng)
        finals.append(state.ou_c)
    # exact transient variance after 3 correlation times from a cold start
    expected_var = 0.02**2 * (1.0 - math.exp(-2.0 * 3000.0 / 1000.0))
    assert np.var(finals) / expected_var == pytest.approx(1.0, abs=0.08)


def test_step_composition_preserves_distribution():
    params = ThermalPlantParams()
    base = initial_plant_state(params, 31.5)
    rng = np.random.default_rng(11)
    split = np.array(
        [
            (s := advance(params, base, 31.5, [3.0, 7.0], rng)).t_tec_c + s.delta_t_c
            for _ in range(20000)
        ]
    )
    rng = np.random.default_rng(12)
    whole = np.array(
        [
            (s := step_plant(base, params, 10.0, 31.5, rng)).t_tec_c + s.delta_t_c
            for _ in range(20000)
        ]
    )
    assert split.mean() == pytest.approx(whole.mean(), abs=2e-4)
    assert split.std() / whole.std() == pytest.approx(1.0, abs=0.05)


def test_wavelength_at_reference_temperature():
    wg = WaveguideModel()
    state = initial_plant_state(QUIET, wg.t0_c)
    assert idler_center_wavelength(wg, state) == 1560.0


def test_wavelength_tracks_gradient_and_pump_linearly():
    wg = WaveguideModel()
    params = ThermalPlantParams(
        tec_noise_rms_c=0.0, relax_amplitude_c=0.59, ou_sigma_c=0.0
    )
    state = initial_plant_state(params, wg.t0_c)
    lam = idler_center_wavelength(wg, state)
    assert lam - 1560.0 == pytest.approx(0.58 * 0.59, rel=1e-12)
    with_pump = idler_center_wavelength(wg, state, pump_offset_nm=0.005, pump_coupling=2.0)
    assert with_pump - lam == pytest.approx(0.010, rel=1e-12)


def test_default_gradient_is_strong_during_warmup():
    params = ThermalPlantParams()
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(1000 + seed)
        state = initial_plant_state(params, 31.5)
        peak = abs(state.delta_t_c)
        for _ in range(500):
            state = step_plant(state, params, 10.0, 31.5, rng)
            peak = max(peak, abs(state.delta_t_c))
        if peak >= 0.3:
            hits += 1
    assert hits >= 90


def test_pump_walk_variance_scales_with_time():
    pump = PumpModel(walk_sigma_nm_per_sqrt_s=5.0e-6)
    rng = np.random.default_rng(3)
    finals = []
    for _ in range(5000):
        x = 0.0
        for _ in range(20):
            x = step_pump(x, pump, 10.0, rng)
        finals.append(x)
    expected = pump.walk_sigma_nm_per_sqrt_s**2 * 200.0
    assert np.var(finals) / expected == pytest.approx(1.0, abs=0.07)


def test_pump_walk_is_step_size_invariant():
    pump = PumpModel(walk_sigma_nm_per_sqrt_s=5.0e-6)
    rng = np.random.default_rng(4)
    one = np.array([step_pump(0.0, pump, 200.0, rng) for _ in range(5000)])
    expected = pump.walk_sigma_nm_per_sqrt_s**2 * 200.0
    assert np.var(one) / expected == pytest.approx(1.0, abs=0.07)


def test_same_seed_reproduces_identical_trajectory():
    params = ThermalPlantParams()
    runs = []
    for _ in range(2):
        rng = np.random.default_rng(99)
        state = initial_plant_state(params, 31.5)
        vals = []
        for _ in range(25):
            state = step_plant(state, params, 10.0, 31.5, rng)
            vals.append((state.t_tec_c, state.delta_t_c))
        runs.append(vals)
    assert runs[0] == runs[1]


def test_invalid_inputs_are_rejected():
    state = initial_plant_state(ThermalPlantParams(), 31.5)
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        step_plant(state, ThermalPlantParams(), 0.0, 31.5, rng)
    with pytest.raises(ValueError):
        step_plant(state, ThermalPlantParams(), 10.0, math.nan, rng)
    with pytest.raises(ValueError):
        ThermalPlantParams(relax_tau_s=0.0)
    with pytest.raises(ValueError):
        WaveguideModel(sigma_i_nm=0.0)
    with pytest.raises(ValueError):
        WaveguideModel(dlambda_dt_nm_per_c=0.0)
    with pytest.raises(ValueError):
        PumpModel(walk_sigma_nm_per_sqrt_s=-1e-9)
    with pytest.raises(ValueError):
        step_pump(0.0, PumpModel(), -1.0, rng)
