"""Experiment configuration: typed blocks, JSON round-trip, validation.

Config files are plain UTF-8 JSON trees. Every key is checked against
the corresponding dataclass; unknown keys are rejected with their full
path so typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .dft import DftChain
from .plant import PumpModel, ThermalPlantParams, WaveguideModel

__all__ = [
    "ConfigError",
    "PidConfig",
    "CalibrationConfig",
    "AnalysisConfig",
    "ExperimentConfig",
    "config_from_dict",
    "config_to_dict",
    "load_config",
    "save_config",
]

SCENARIOS = ("open-loop", "closed-loop", "pump-floor")


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


@dataclass(frozen=True)
class PidConfig:
    """Controller gains, gating threshold, and setpoint safety band."""

    kp: float = 0.6
    ki: float = 0.15
    kd: float = 0.05
    tau_th_ps: float = 4.0
    t_min_c: float = 21.5
    t_max_c: float = 41.5

    def __post_init__(self) -> None:
        for name in ("kp", "ki", "kd"):
            if not (getattr(self, name) >= 0.0):
                raise ConfigError(f"pid.{name} must be >= 0")
        if not (self.tau_th_ps > 0.0):
            raise ConfigError("pid.tau_th_ps must be positive")
        if not (self.t_min_c < self.t_max_c):
            raise ConfigError("pid.t_min_c must be below pid.t_max_c")


@dataclass(frozen=True)
class CalibrationConfig:
    """Sweep layout for the dispersion and temperature calibrations."""

    gdd_sweep_start_nm: float = 1559.79
    gdd_sweep_step_nm: float = 0.4
    gdd_sweep_points: int = 9
    filter_bandwidth_nm: float = 0.80
    temp_sweep_start_c: float = 21.5
    temp_sweep_step_c: float = 2.0
    temp_sweep_points: int = 11
    record_file: str | None = None

    def __post_init__(self) -> None:
        if self.gdd_sweep_points < 3 or self.temp_sweep_points < 3:
            raise ConfigError("calibration sweeps need at least 3 points")
        if not (self.gdd_sweep_step_nm > 0.0 and self.temp_sweep_step_c > 0.0):
            raise ConfigError("calibration sweep steps must be positive")
        if not (self.filter_bandwidth_nm > 0.0):
            raise ConfigError("calibration.filter_bandwidth_nm must be positive")

    def gdd_sweep_centers(self) -> list[float]:
        return [
            self.gdd_sweep_start_nm + i * self.gdd_sweep_step_nm
            for i in range(self.gdd_sweep_points)
        ]

    def temp_sweep(self) -> list[float]:
        return [
            self.temp_sweep_start_c + i * self.temp_sweep_step_c
            for i in range(self.temp_sweep_points)
        ]


@dataclass(frozen=True)
class AnalysisConfig:
    """Post-processing choices for drift summary and ADEV."""

    histogram_bins: int = 51
    taus_per_decade: int = 10

    def __post_init__(self) -> None:
        if self.histogram_bins < 1:
            raise ConfigError("analysis.histogram_bins must be >= 1")
        if self.taus_per_decade < 1:
            raise ConfigError("analysis.taus_per_decade must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one simulated run."""

    scenario: str = "closed-loop"
    duration_s: float = 50400.0
    control_period_s: float = 10.0
    seed: int = 20260824
    output_dir: str = "runs/latest"
    waveguide: WaveguideModel = field(default_factory=WaveguideModel)
    plant: ThermalPlantParams = field(default_factory=ThermalPlantParams)
    pump: PumpModel = field(default_factory=PumpModel)
    dft: DftChain = field(default_factory=DftChain)
    pid: PidConfig = field(default_factory=PidConfig)
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}")
        if not (self.duration_s > 0.0 and math.isfinite(self.duration_s)):
            raise ConfigError("duration_s must be positive and finite")
        if not (self.control_period_s > 0.0 and math.isfinite(self.control_period_s)):
            raise ConfigError("control_period_s must be positive and finite")
        if self.control_period_s < self.dft.integration_time_s:
            raise ConfigError(
                "control_period_s must be >= dft.integration_time_s "
                "(one histogram per control cycle)"
            )
        if self.duration_s < 10.0 * self.control_period_s:
            raise ConfigError("duration_s must cover at least 10 control cycles")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError("seed must be an integer")
        if not (0 <= self.seed < 2**64):
            raise ConfigError("seed must fit in 64 bits")

    @property
    def n_cycles(self) -> int:
        return int(self.duration_s // self.control_period_s)


_BLOCKS = {
    "waveguide": WaveguideModel,
    "plant": ThermalPlantParams,
    "pump": PumpModel,
    "dft": DftChain,
    "pid": PidConfig,
    "calibration": CalibrationConfig,
    "analysis": AnalysisConfig,
}

_TUPLE_FIELDS = {"window_ps"}


def _build_block(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must be a table of keys")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown config key {path}.{sorted(unknown)[0]}")
    kwargs = {}
    for key, value in data.items():
        if key in _TUPLE_FIELDS:
            if not (isinstance(value, (list, tuple)) and len(value) == 2):
                raise ConfigError(f"{path}.{key} must be a pair of numbers")
            value = (float(value[0]), float(value[1]))
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value in {path}: {exc}") from exc


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build and validate a config from a parsed JSON tree."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a table of keys")
    top_names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - top_names
    if unknown:
        raise ConfigError(f"unknown config key {sorted(unknown)[0]}")
    kwargs = {}
    for key, value in data.items():
        if key in _BLOCKS:
            kwargs[key] = _build_block(_BLOCKS[key], value, key)
        else:
            kwargs[key] = value
    try:
        return ExperimentConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Plain JSON-ready tree; inverse of :func:`config_from_dict`."""
    tree = dataclasses.asdict(cfg)
    tree["dft"]["window_ps"] = list(tree["dft"]["window_ps"])
    return tree


def load_config(path) -> ExperimentConfig:
    """Load a JSON config file."""
    p = Path(path)
    try:
        with open(p, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {p}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def save_config(cfg: ExperimentConfig, path) -> None:
    """Write a config as formatted JSON (round-trips exactly)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
