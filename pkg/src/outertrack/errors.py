"""Exception types shared across the package."""


class OutertrackError(Exception):
    """Base class for all package errors."""


class BacktrackError(OutertrackError):
    """Substituting edge images produced a cancellation."""


class InvalidFold(OutertrackError):
    pass


class NotHomotopyEquivalence(OutertrackError):
    pass


class InvalidPath(OutertrackError):
    """A path is not incident, not reduced, or has the wrong endpoints."""


class ZeroDiagonal(OutertrackError):
    pass


class ConstructionMismatch(OutertrackError):
    """Composed elementary maps disagree with the closed-form images."""


class InvalidParameters(OutertrackError):
    pass


class InvalidConfig(OutertrackError):
    pass


class GameViolation(OutertrackError):
    """Alice could not answer a move within the requested envelope."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


class InsufficientDepth(OutertrackError):
    pass


class OrderViolation(OutertrackError):
    def __init__(self, message, offending=None):
        super().__init__(message)
        self.offending = offending


class NotApplicable(OutertrackError):
    pass


class RankTooSmall(InvalidParameters):
    pass


class CertificateViolation(OutertrackError):
    """A certified product left its theoretical envelope."""


class MonotonicityViolation(OutertrackError):
    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


class NoIllegalTurn(OutertrackError):
    pass
