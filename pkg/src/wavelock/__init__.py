"""Simulated closed-loop wavelength stabilization of a photon-pair source.

The package models a temperature-tuned nonlinear waveguide whose idler
wavelength is read out through dispersive time-of-flight coincidence
histograms and held against drift by a threshold-gated PID acting on the
oven setpoint. Modules: plant (thermal + pump models), dft (histogram
synthesis and Gaussian fits), calibration (dispersion and tuning-slope
sweeps), controller (gated PID), stability (drift stats and Allan
deviation), harness (scenario runs and reports), cli (command line).
"""

from .calibration import (
    CalibrationError,
    CalibrationRecord,
    LinearFitResult,
    linear_fit,
    load_calibration,
    save_calibration,
)
from .config import ConfigError, ExperimentConfig, load_config, save_config
from .controller import PidGains, PidState, commanded_setpoint, initialize, pid_update
from .dft import (
    CoincidenceHistogram,
    DftChain,
    GaussianFit,
    HistogramWindowError,
    expected_profile,
    fit_gaussian,
    sample_histogram,
    tau_shift_to_wavelength_shift,
)
from .harness import (
    ControlLoopError,
    RunReport,
    run_calibrations,
    run_closed_loop,
    run_open_loop,
    run_pump_floor,
    run_scenario,
    write_report,
)
from .plant import (
    PumpModel,
    ThermalPlantParams,
    ThermalPlantState,
    WaveguideModel,
    idler_center_wavelength,
    initial_plant_state,
    step_plant,
    step_pump,
)
from .stability import (
    AdevCurve,
    WavelengthSeries,
    allan_deviation,
    default_taus,
    fit_loglog_slope,
    summarize,
)

__version__ = "0.1.0"
