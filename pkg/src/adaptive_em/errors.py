"""Exception types raised across the package."""


class AdaptiveEMError(Exception):
    """Base class for all package errors."""


class ConfigInvalid(AdaptiveEMError, ValueError):
    pass


class NonNegativityViolation(AdaptiveEMError, ValueError):
    pass


class ZeroDiffusionAtNonzero(AdaptiveEMError, ValueError):
    pass


class NonPositiveInitial(AdaptiveEMError, ValueError):
    pass


class NonFiniteState(AdaptiveEMError, ValueError):
    pass


class StepOverflowError(AdaptiveEMError, OverflowError):
    """f(x) or g(x)**2 left the range where the floored step is representable."""


class NonPositiveStep(AdaptiveEMError, ValueError):
    pass


class OutOfDomain(AdaptiveEMError, ValueError):
    pass


class StepBoundViolation(AdaptiveEMError, AssertionError):
    """A produced step broke h*f <= h_bar or sqrt(h)*g <= sqrt(h_bar)."""
