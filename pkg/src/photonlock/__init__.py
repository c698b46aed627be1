"""Photon-counting phase lock of a Mach-Zehnder interferometer.

Discrete-event Monte Carlo of the per-click I-controller together with the
closed-form Ornstein-Uhlenbeck description of the lock, drift models and the
estimators needed to compare the two.
"""

from photonlock.ifmodel import (
    DetectorConfig,
    FringeModel,
    LockPoint,
    apply_darkcounts,
    click_ratio,
    fringe_slope,
    lock_point,
    slope_magnitude,
)
from photonlock.drift import (
    Composite,
    DopplerParams,
    FromASD,
    Linear,
    NoDrift,
    NoiseSpectrum,
    Wiener,
    doppler_drift_rate,
    drift_increment,
    synthesize_from_asd,
)
from photonlock.controller import (
    ActuatorModel,
    AveragingN,
    ControllerState,
    Immediate,
    PI,
    StepParams,
    make_step_params,
    quantize,
)
from photonlock.sim import SimConfig, SimResult, replay, run, sweep
from photonlock import analytics, estimators

__version__ = "0.1.0"

__all__ = [
    "ActuatorModel",
    "AveragingN",
    "Composite",
    "ControllerState",
    "DetectorConfig",
    "DopplerParams",
    "FringeModel",
    "FromASD",
    "Immediate",
    "Linear",
    "LockPoint",
    "NoDrift",
    "NoiseSpectrum",
    "PI",
    "SimConfig",
    "SimResult",
    "StepParams",
    "Wiener",
    "analytics",
    "apply_darkcounts",
    "click_ratio",
    "doppler_drift_rate",
    "drift_increment",
    "estimators",
    "fringe_slope",
    "lock_point",
    "make_step_params",
    "quantize",
    "replay",
    "run",
    "slope_magnitude",
    "sweep",
    "synthesize_from_asd",
]
