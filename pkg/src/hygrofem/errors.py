"""Exception hierarchy shared by all hygrofem modules."""


class HygroError(Exception):
    """Base class for every error raised by the package."""


# domain
class DomainError(HygroError):
    pass


class OverlappingLayers(DomainError):
    pass


class DisconnectedDomain(DomainError):
    pass


class CrossPoint(DomainError):
    pass


# materials
class OutOfDomain(HygroError):
    """A state sample lies outside the tabulated range of a material function."""


class CurveError(HygroError):
    pass


# assembly
class DimensionMismatch(HygroError):
    pass


class NonfiniteCoefficient(HygroError):
    pass


# linsolve
class Breakdown(HygroError):
    pass


class MaxIterExceeded(HygroError):
    """Raised when the Krylov solver runs out of iterations.

    The best iterate found so far is kept on ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


# stepper
class NonfiniteState(HygroError):
    pass


class NonContraction(HygroError):
    """Picard ratios stayed >= 1 for three consecutive iterations."""

    def __init__(self, message, ratios=()):
        super().__init__(message)
        self.ratios = list(ratios)


class MaxPicardExceeded(HygroError):
    def __init__(self, message, ratios=()):
        super().__init__(message)
        self.ratios = list(ratios)


# pencil
class ContourThroughZero(HygroError):
    pass


# appio
class ParseError(HygroError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(HygroError):
    def __init__(self, key, message=""):
        super().__init__(f"{key}: {message}" if message else key)
        self.key = key


class NonMonotoneTime(HygroError):
    pass


class BadColumnCount(HygroError):
    pass
