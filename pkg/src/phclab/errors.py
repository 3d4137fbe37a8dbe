"""Exception types raised across the package."""


class PhcError(Exception):
    """Base class for all library errors."""


class SingularPoint(PhcError):
    """J (or a quantity built from it) was requested on the vanishing circle."""


class OutOfRange(PhcError, ValueError):
    """A parameter lies outside its admissible interval."""


class EndpointDegenerate(PhcError):
    """The requested quantity degenerates at an interval endpoint."""


class BlowUp(PhcError):
    """An integrated trajectory left the region u > 0."""


class TargetOutOfRange(PhcError, ValueError):
    """A requested period lies outside the scanned range of the period map."""

    def __init__(self, message, t_lo=None, t_hi=None):
        super().__init__(message)
        self.t_lo = t_lo
        self.t_hi = t_hi


class NonPeriodic(PhcError):
    pass


class EmptyLevel(PhcError, ValueError):
    pass


class DegenerateFrame(PhcError):
    pass


class RegionClipFailure(PhcError):
    pass


class EmptyIntersection(PhcError):
    pass


class NonTransverse(PhcError):
    pass


class OutOfRadius(PhcError, ValueError):
    pass


class GridTooCoarse(PhcError):
    pass


class SheetCountMismatch(PhcError):
    pass


class FoldDetected(PhcError):
    pass


class FitIllConditioned(PhcError):
    pass


class NoSolution(PhcError):
    pass
