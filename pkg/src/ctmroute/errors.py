"""Exception hierarchy shared by every module."""


class CTMError(Exception):
    """Base class for all errors raised by :mod:`ctmroute`."""


class DomainError(CTMError, ValueError):
    """An argument lies outside the domain of the operation."""


class UnattainableTimeError(DomainError):
    """A route travel time cannot be realised by any consistent density vector."""

    def __init__(self, target, nearest, message=None):
        self.target = target
        self.nearest = nearest
        super().__init__(
            message
            or f"travel time {target!r} h is not attainable (nearest attainable {nearest!r} h)"
        )


class AssumptionViolation(CTMError, ValueError):
    """Input network or demand violates one of the model assumptions.

    Attributes:
        assumption: 1 (unique bottleneck), 2 (demand within min-cut capacity)
            or 3 (distinct free-flow and saturated route times).
    """

    def __init__(self, assumption: int, message: str):
        self.assumption = assumption
        super().__init__(f"assumption {assumption} violated: {message}")
