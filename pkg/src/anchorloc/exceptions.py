"""Exception types raised by anchorloc."""


class AnchorlocError(Exception):
    """Base class for all anchorloc errors."""


class DimensionMismatchError(AnchorlocError, ValueError):
    pass


class RankDeficientError(AnchorlocError, ValueError):
    """Anchors span fewer affine dimensions than their ambient dimension."""


class NotEuclideanError(AnchorlocError, ValueError):
    """Distance matrix has a significant negative Gram eigenvalue."""


class OutOfDomainError(AnchorlocError, ValueError):
    """Multiplier lies outside the positive-definite interval."""


class NoConvergenceError(AnchorlocError, RuntimeError):
    pass


class DegenerateSubspaceError(AnchorlocError, ValueError):
    pass


class ShapeMismatchError(AnchorlocError, ValueError):
    pass


class ParseError(AnchorlocError, ValueError):
    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno
