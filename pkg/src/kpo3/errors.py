"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes, so keep the three families distinct:
configuration problems, numerical failures and physics guards.
"""


class KpoError(Exception):
    """Base class for all package errors."""


class ConfigError(KpoError, ValueError):
    """Invalid or inconsistent input parameters."""


class DimensionError(ConfigError):
    """Fock truncation too small or operand dimensions disagree."""


class NumericsError(KpoError, RuntimeError):
    """A solver, integrator or fit did not meet its accuracy target."""


class IntegratorError(NumericsError):
    pass


class FitError(NumericsError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class PhysicsGuardError(KpoError, RuntimeError):
    """A physical sanity guard (truncation, tracking, uniqueness) tripped."""


class TruncationError(PhysicsGuardError):
    pass


class TrackingError(PhysicsGuardError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class SteadyStateError(PhysicsGuardError):
    def __init__(self, message, kernel_dim=None):
        super().__init__(message)
        self.kernel_dim = kernel_dim
