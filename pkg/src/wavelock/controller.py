"""Threshold-gated digital PID acting on inferred temperature drift.

Each control cycle compares the fitted peak delay against the fixed
reference taken at loop start. Shifts below the gating threshold are
treated as measurement noise: no correction is applied and the PID
history is left untouched. Above threshold the shift is converted to an
inferred temperature drift

    delta_T_k = dtau_k / (gdd * dlambda_dT)

and the correction increment is

    eps_k = kp * delta_T_k + ki * sum_j delta_T_j + kd * (delta_T_k - delta_T_{k-1})

accumulated into a running setpoint offset; the commanded oven setpoint
is T0 - accumulated_correction, clamped to a safety band. The integral
sum is clamped so the integral term alone can never command more than
the full band (anti-windup).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

__all__ = [
    "PidGains",
    "PidState",
    "initialize",
    "infer_delta_t",
    "pid_update",
    "commanded_setpoint",
]


@dataclass(frozen=True)
class PidGains:
    """PID gains, per control cycle."""

    kp: float = 0.6
    ki: float = 0.15
    kd: float = 0.05

    def __post_init__(self) -> None:
        for name in ("kp", "ki", "kd"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise ValueError(f"{name} must be finite and >= 0")


@dataclass(frozen=True)
class PidState:
    """Controller state between cycles (pure value, updated by replace)."""

    tau0_ini_ps: float
    tau_th_ps: float
    gains: PidGains
    t_min_c: float
    t_max_c: float
    integral_sum_c: float = 0.0
    prev_delta_t_c: float = 0.0
    correction_accum_c: float = 0.0
    cycle_index: int = 0
    skipped: int = 0


def initialize(
    first_fit_tau0_ps: float,
    tau_th_ps: float,
    gains: PidGains,
    t_min_c: float = 21.5,
    t_max_c: float = 41.5,
) -> PidState:
    """Fresh controller state referenced to the first fitted centroid."""
    if not math.isfinite(first_fit_tau0_ps):
        raise ValueError("first_fit_tau0_ps must be finite")
    if not (tau_th_ps > 0.0 and math.isfinite(tau_th_ps)):
        raise ValueError("tau_th_ps must be positive and finite")
    if not (t_min_c < t_max_c):
        raise ValueError("t_min_c must be below t_max_c")
    return PidState(
        tau0_ini_ps=first_fit_tau0_ps,
        tau_th_ps=tau_th_ps,
        gains=gains,
        t_min_c=t_min_c,
        t_max_c=t_max_c,
    )


def infer_delta_t(dtau_ps: float, gdd_ps_per_nm: float, dlambda_dt_nm_per_c: float) -> float:
    """Temperature drift implied by a centroid shift."""
    denom = gdd_ps_per_nm * dlambda_dt_nm_per_c
    if denom == 0.0 or not math.isfinite(denom):
        raise ValueError("gdd * dlambda_dT must be finite and nonzero")
    return dtau_ps / denom


def pid_update(
    state: PidState,
    dtau_ps: float,
    gdd_ps_per_nm: float,
    dlambda_dt_nm_per_c: float,
) -> tuple[PidState, float]:
    """One control cycle; returns the new state and the increment eps_k.

    A non-finite dtau (failed measurement upstream) leaves the state
    unchanged apart from the skip counter. A sub-threshold dtau advances
    only the cycle counter: integral sum, previous-error memory, and the
    accumulated correction stay frozen.
    """
    if not math.isfinite(dtau_ps):
        return replace(state, skipped=state.skipped + 1), 0.0
    if abs(dtau_ps) < state.tau_th_ps:
        return replace(state, cycle_index=state.cycle_index + 1), 0.0

    delta_t = infer_delta_t(dtau_ps, gdd_ps_per_nm, dlambda_dt_nm_per_c)
    g = state.gains
    integral = state.integral_sum_c + delta_t
    if g.ki > 0.0:
        limit = (state.t_max_c - state.t_min_c) / g.ki
        integral = min(max(integral, -limit), limit)
    eps = g.kp * delta_t + g.ki * integral + g.kd * (delta_t - state.prev_delta_t_c)
    new_state = replace(
        state,
        integral_sum_c=integral,
        prev_delta_t_c=delta_t,
        correction_accum_c=state.correction_accum_c + eps,
        cycle_index=state.cycle_index + 1,
    )
    return new_state, eps


def commanded_setpoint(state: PidState, t0_c: float) -> float:
    """Oven setpoint for the next cycle, clamped to the safety band.

    Sign convention: a positive inferred drift (idler moved to longer
    delay, source running hot against the reference) lowers the target.
    """
    if not math.isfinite(t0_c):
        raise ValueError("t0_c must be finite")
    target = t0_c - state.correction_accum_c
    return min(max(target, state.t_min_c), state.t_max_c)
