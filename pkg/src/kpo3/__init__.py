"""Simulation toolkit for a three-photon Kerr parametric oscillator."""
from .errors import (ConfigError, DimensionError, FitError, IntegratorError, KpoError,
                     NumericsError, PhysicsGuardError, SteadyStateError, TrackingError,
                     TruncationError)
from .model import DissipationSpec, KpoParams, PumpSchedule, hamiltonian

__all__ = [
    "ConfigError", "DimensionError", "FitError", "IntegratorError", "KpoError", "NumericsError",
    "PhysicsGuardError", "SteadyStateError", "TrackingError", "TruncationError",
    "DissipationSpec", "KpoParams", "PumpSchedule", "hamiltonian",
]
__version__ = "0.1.0"
