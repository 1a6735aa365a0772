"""Exception types raised by aflab."""


class AfLabError(ValueError):
    """Base class for every error aflab raises on bad input."""


class InvalidArgumentError(AfLabError):
    """A parameter is outside the supported domain."""


class AssumptionViolationError(AfLabError):
    """A constellation is not unit-power, zero-mean and proper (zero pseudo-variance)."""


class StateSpaceTooLargeError(AfLabError):
    """Exhaustive enumeration was requested over too many symbol sequences."""
