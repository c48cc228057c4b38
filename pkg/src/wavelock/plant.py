"""Thermal and pump models for the simulated photon-pair source.

The nonlinear waveguide sits in a TEC-regulated oven. The oven sensor
temperature tracks its setpoint as a first-order system with a small
amount of regulation noise. On top of that, an internal thermal gradient
offsets the temperature actually seen by the down-conversion region;
that offset is modeled as a slow deterministic relaxation (equilibration
after the initial heat-up) plus an Ornstein-Uhlenbeck wander and an
optional ambient sinusoid. Pump-laser drift is a wavelength random walk
that feeds through to the idler with a fixed coupling factor.

All stochastic updates use exact discretizations, so advancing the state
by dt and then dt' is statistically identical to one dt+dt' step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "WaveguideModel",
    "ThermalPlantParams",
    "ThermalPlantState",
    "PumpModel",
    "initial_plant_state",
    "step_plant",
    "idler_center_wavelength",
    "step_pump",
]


@dataclass(frozen=True)
class WaveguideModel:
    """Linearized tuning model of the waveguide around degeneracy.

    Attributes:
        length_mm: physical waveguide length, bookkeeping only.
        t0_c: degenerate phase-matching temperature (degC).
        lambda_deg_nm: idler center wavelength at ``t0_c``.
        dlambda_dt_nm_per_c: idler tuning slope versus temperature.
        sigma_i_nm: RMS spectral width of the idler marginal.
    """

    length_mm: float = 15.0
    t0_c: float = 31.5
    lambda_deg_nm: float = 1560.0
    dlambda_dt_nm_per_c: float = 0.58
    sigma_i_nm: float = 1.5

    def __post_init__(self) -> None:
        if not (self.length_mm > 0.0):
            raise ValueError("length_mm must be positive")
        if not (self.sigma_i_nm > 0.0):
            raise ValueError("sigma_i_nm must be positive")
        if not math.isfinite(self.t0_c) or not math.isfinite(self.lambda_deg_nm):
            raise ValueError("waveguide temperatures and wavelengths must be finite")
        if not (self.dlambda_dt_nm_per_c != 0.0 and math.isfinite(self.dlambda_dt_nm_per_c)):
            raise ValueError("dlambda_dt_nm_per_c must be finite and nonzero")


@dataclass(frozen=True)
class ThermalPlantParams:
    """Disturbance and actuator parameters of the oven plant.

    ``relax_amplitude_c``/``relax_tau_s`` describe the deterministic
    settling of the internal gradient after heat-up; the OU pair gives
    the stationary RMS and correlation time of the residual gradient
    wander. ``tec_noise_rms_c`` is the stationary RMS of the regulation
    noise around the setpoint (correlation time equals the TEC time
    constant).
    """

    tec_time_constant_s: float = 5.0
    tec_noise_rms_c: float = 0.005
    relax_amplitude_c: float = 0.45
    relax_tau_s: float = 12000.0
    ou_sigma_c: float = 0.008
    ou_tau_s: float = 30000.0
    ambient_amp_c: float = 0.0
    ambient_period_s: float = 86400.0

    def __post_init__(self) -> None:
        for name in ("tec_time_constant_s", "relax_tau_s", "ou_tau_s", "ambient_period_s"):
            if not (getattr(self, name) > 0.0):
                raise ValueError(f"{name} must be positive")
        for name in ("tec_noise_rms_c", "relax_amplitude_c", "ou_sigma_c", "ambient_amp_c"):
            v = getattr(self, name)
            if not (v >= 0.0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and >= 0")


@dataclass(frozen=True)
class ThermalPlantState:
    """Snapshot of the plant at time ``t_s``.

    ``delta_t_c`` is the gradient offset between the down-conversion
    region and the oven sensor; it always equals
    ``relax_c + ou_c + ambient(t)``.
    """

    t_s: float
    t_tec_c: float
    delta_t_c: float
    ou_c: float
    relax_c: float
    setpoint_c: float


def _ambient(params: ThermalPlantParams, t_s: float) -> float:
    if params.ambient_amp_c == 0.0:
        return 0.0
    return params.ambient_amp_c * math.sin(2.0 * math.pi * t_s / params.ambient_period_s)


def initial_plant_state(params: ThermalPlantParams, setpoint_c: float) -> ThermalPlantState:
    """State at t=0, just after the oven reached its setpoint.

    The gradient starts at the full relaxation amplitude and the OU
    wander starts at zero (it builds toward its stationary spread).
    """
    if not math.isfinite(setpoint_c):
        raise ValueError("setpoint_c must be finite")
    relax = params.relax_amplitude_c
    return ThermalPlantState(
        t_s=0.0,
        t_tec_c=setpoint_c,
        delta_t_c=relax + _ambient(params, 0.0),
        ou_c=0.0,
        relax_c=relax,
        setpoint_c=setpoint_c,
    )


def step_plant(
    state: ThermalPlantState,
    params: ThermalPlantParams,
    dt_s: float,
    setpoint_c: float,
    rng: np.random.Generator,
) -> ThermalPlantState:
    """Advance the plant by ``dt_s`` with the given commanded setpoint.

    The TEC temperature is an exact OU update around the setpoint; the
    gradient relaxation decays deterministically and the gradient OU term
    uses the exact discretization, so step composition is distribution
    preserving for any dt.
    """
    if not (dt_s > 0.0 and math.isfinite(dt_s)):
        raise ValueError("dt_s must be positive and finite")
    if not math.isfinite(setpoint_c):
        raise ValueError("setpoint_c must be finite")

    z_tec, z_ou = rng.standard_normal(2)

    a_tec = math.exp(-dt_s / params.tec_time_constant_s)
    t_tec = (
        setpoint_c
        + (state.t_tec_c - setpoint_c) * a_tec
        + params.tec_noise_rms_c * math.sqrt(1.0 - a_tec * a_tec) * z_tec
    )

    relax = state.relax_c * math.exp(-dt_s / params.relax_tau_s)

    a_ou = math.exp(-dt_s / params.ou_tau_s)
    ou = state.ou_c * a_ou + params.ou_sigma_c * math.sqrt(1.0 - a_ou * a_ou) * z_ou

    t_new = state.t_s + dt_s
    return ThermalPlantState(
        t_s=t_new,
        t_tec_c=t_tec,
        delta_t_c=relax + ou + _ambient(params, t_new),
        ou_c=ou,
        relax_c=relax,
        setpoint_c=setpoint_c,
    )


def idler_center_wavelength(
    wg: WaveguideModel,
    state: ThermalPlantState,
    pump_offset_nm: float = 0.0,
    pump_coupling: float = 2.0,
) -> float:
    """Idler center wavelength for the current plant state.

    Linear model: lambda_deg + dlambda/dT * (T_spdc - T0) plus the
    coupled pump offset, with T_spdc = T_tec + delta_T.
    """
    if not math.isfinite(pump_offset_nm):
        raise ValueError("pump_offset_nm must be finite")
    t_spdc = state.t_tec_c + state.delta_t_c
    return (
        wg.lambda_deg_nm
        + wg.dlambda_dt_nm_per_c * (t_spdc - wg.t0_c)
        + pump_coupling * pump_offset_nm
    )


@dataclass(frozen=True)
class PumpModel:
    """Pump laser drift model: unbounded wavelength random walk."""

    lambda_p_nm: float = 780.0
    walk_sigma_nm_per_sqrt_s: float = 5.5e-6
    coupling: float = 2.0

    def __post_init__(self) -> None:
        if not (self.lambda_p_nm > 0.0):
            raise ValueError("lambda_p_nm must be positive")
        if not (self.walk_sigma_nm_per_sqrt_s >= 0.0):
            raise ValueError("walk_sigma_nm_per_sqrt_s must be >= 0")
        if not math.isfinite(self.coupling):
            raise ValueError("coupling must be finite")


def step_pump(
    offset_nm: float,
    pump: PumpModel,
    dt_s: float,
    rng: np.random.Generator,
) -> float:
    """Advance the pump wavelength offset by one random-walk increment.

    Increment std is walk_sigma * sqrt(dt), so the offset variance after
    N steps of dt is walk_sigma**2 * N * dt regardless of step size.
    """
    if not (dt_s > 0.0 and math.isfinite(dt_s)):
        raise ValueError("dt_s must be positive and finite")
    z = rng.standard_normal()
    return offset_nm + pump.walk_sigma_nm_per_sqrt_s * math.sqrt(dt_s) * z
