"""Exception types shared across the package."""


class LockError(ValueError):
    """Base class for invalid lock configurations."""


class InstabilityError(LockError):
    """Step parameter and fringe slope have the same sign (or the slope is zero)."""


class DomainError(LockError):
    """Requested click ratio cannot be reached at the given visibility."""


class ConfigError(ValueError):
    """Invalid simulation or CLI configuration."""


class DriftNotSynthesizedError(RuntimeError):
    """An ASD-driven drift model was used before its trace was synthesized."""


class QuadratureError(RuntimeError):
    def __init__(self, message, achieved_tol):
        super().__init__(f"{message} (achieved relative tolerance {achieved_tol:.3g})")
        self.achieved_tol = achieved_tol


class UnstableFitError(RuntimeError):
    """Lag-1 regression found no decay (coefficient >= 1)."""


class NonConvergenceWarning(UserWarning):
    """The lock left the linear regime for a large share of the steady state."""
