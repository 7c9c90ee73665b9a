"""
Error types shared by the solvers, the pipeline and the CLI.
Every failure a caller is expected to handle has its own class here.
"""

from typing import Optional


class CardSdpError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(CardSdpError):
    """Instance file is missing, is not JSON, or lacks a required key."""


class ValidationError(CardSdpError):
    """
    Input parsed but violates a named invariant.

    Args:
        invariant: Short name of the violated invariant (e.g. "symmetry")
        detail: Human-readable explanation
    """

    def __init__(self, invariant: str, detail: str = ""):
        self.invariant = invariant
        self.detail = detail
        message = f"{invariant}: {detail}" if detail else invariant
        super().__init__(message)


class LinAlgFailure(CardSdpError):
    """A dense kernel could not complete."""


class NotPositiveDefinite(LinAlgFailure):
    def __init__(self, pivot: int):
        self.pivot = pivot
        super().__init__(f"matrix is not positive definite (pivot {pivot})")


class NoConvergence(LinAlgFailure):
    def __init__(self, detail: str = ""):
        self.detail = detail
        super().__init__(f"eigensolver did not converge {detail}".strip())


class CornerNotUnit(CardSdpError):
    def __init__(self, value: float):
        self.value = value
        super().__init__(f"lifted matrix corner is {value!r}, expected 1")


class DimensionMismatch(CardSdpError):
    pass


class NumericalFailure(CardSdpError):
    """Interior-point or QP solve broke down numerically."""

    def __init__(self, detail: str = "", status: Optional[str] = None):
        self.status = status
        super().__init__(detail or "numerical failure")


class TooLarge(CardSdpError):
    def __init__(self, count: int, limit: int):
        self.count = count
        self.limit = limit
        super().__init__(f"{count} supports to enumerate exceeds the limit of {limit}")
