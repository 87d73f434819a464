"""Exception hierarchy shared by every module."""


class SteinitzLabError(Exception):
    """Base class for all library errors."""


class SpecError(SteinitzLabError, ValueError):
    """Malformed series, matrix, or grid description."""


class DivergentSeries(SpecError):
    """A component stream does not converge."""


class DimensionMismatch(SteinitzLabError, ValueError):
    pass


class ToleranceUnreachable(SteinitzLabError):
    """Certified summation would need more terms than the configured cap."""

    def __init__(self, message, required_terms=None):
        super().__init__(message)
        self.required_terms = required_terms


class PreconditionViolated(SteinitzLabError, ValueError):
    """A solver hypothesis does not hold; ``kind`` names which one."""

    def __init__(self, kind, message):
        super().__init__(f"{kind}: {message}")
        self.kind = kind


class BoundMissed(SteinitzLabError):
    pass


class SearchExhausted(SteinitzLabError):
    pass


class NotInDomain(SteinitzLabError):
    """Target is off the domain of sums; carries a separating functional."""

    def __init__(self, message, functional=None, distance=None):
        super().__init__(message)
        self.functional = functional
        self.distance = distance


class NotConditional(SteinitzLabError, ValueError):
    pass


class StageFailure(SteinitzLabError):
    def __init__(self, stage, message, diagnostics=None):
        super().__init__(f"stage {stage}: {message}")
        self.stage = stage
        self.diagnostics = diagnostics or {}


class UndecidableFamily(SteinitzLabError):
    """Finite tabulated data cannot certify an infinite tail."""


class ChainTooShort(SteinitzLabError, ValueError):
    pass


class IndexOutOfRange(SteinitzLabError, IndexError):
    pass


class InsufficientDimension(SteinitzLabError, ValueError):
    pass


class RepresentationInvalid(SteinitzLabError, ValueError):
    pass


class EnumerationOverflow(SteinitzLabError):
    """Lattice enumeration hit its node budget.

    ``partial`` is the smallest distance seen among the visited elements.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class CertificateReplayFailed(SteinitzLabError):
    pass
