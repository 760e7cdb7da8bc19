"""Exception hierarchy shared by the analytic, finite-difference and Monte Carlo engines."""


class FpeError(Exception):
    """Base class for every error raised by fpe_sim."""


class DomainError(FpeError, ValueError):
    """An argument lies outside the domain of the operation (t <= 0, z outside [z_lo, z_hi], ...)."""


class ParameterError(FpeError, ValueError):
    """A family parameter set violates its validity constraints."""


class SingularityError(FpeError, ArithmeticError):
    """The diffusion profile vanishes where a division by it is required."""


class NonNormalizableError(FpeError, ArithmeticError):
    """The similarity profile has no finite integral over its domain."""


class QuadratureError(FpeError, ArithmeticError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class InstabilityError(FpeError, RuntimeError):
    """Numerical blow-up detected during time integration."""


class ConfigError(FpeError, ValueError):
    """Inconsistent solver or scenario configuration."""


class InvalidStateError(FpeError, RuntimeError):
    """A Monte Carlo path produced a non-finite value."""


class SupportMismatchError(FpeError, ValueError):
    """An analytic density carries significant mass outside an empirical support."""
