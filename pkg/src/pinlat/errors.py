"""Exception hierarchy.

``ConfigError`` covers bad user input (CLI exit code 1); everything derived
from ``NumericalError`` is a solver-side failure (CLI exit code 2).
"""
from __future__ import annotations


class PinlatError(Exception):
    """Base class for all library errors."""

    def to_dict(self) -> dict:
        return {"error": type(self).__name__, "message": str(self)}


class ConfigError(PinlatError, ValueError):
    pass


class NumericalError(PinlatError):
    pass


class NoConvergence(NumericalError):
    pass


class MonotonicityLost(NumericalError):
    pass


class NotSettled(NumericalError):
    def __init__(self, message: str, crossings=None):
        super().__init__(message)
        # (t, level crossing) samples recorded before giving up
        self.crossings = list(crossings or [])


class BranchLost(NumericalError):
    pass


class NoFold(NumericalError):
    pass


class EscapedDomain(NumericalError):
    pass


class DegenerateEigenvalue(NumericalError):
    pass


class NonHyperbolic(NumericalError):
    pass


class NotAtFold(NumericalError):
    pass


class BlowUp(NumericalError):
    pass


class FrontHitBoundary(NumericalError):
    pass


class NoFront(NumericalError):
    pass


class BadBracket(NumericalError):
    pass
