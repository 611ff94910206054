"""Exception types shared across the package."""
from __future__ import annotations


class IsomwalkError(Exception):
    """Base class for package-specific errors."""


class ExactnessUnavailable(IsomwalkError, ValueError):
    """An exact-arithmetic operation was asked of a numeric-only angle."""


class PrecisionShortfall(IsomwalkError, ArithmeticError):
    """The working precision cannot certify the requested computation.

    ``required_bits`` says how many bits would be enough.
    """

    def __init__(self, message: str, required_bits: int):
        super().__init__(message)
        self.required_bits = required_bits


class BudgetExceeded(IsomwalkError, RuntimeError):
    """A configured memory or enumeration budget would be exceeded.

    ``budget`` names the budget that ran out.
    """

    def __init__(self, message: str, budget: str):
        super().__init__(message)
        self.budget = budget


class ConvergenceError(IsomwalkError, RuntimeError):
    """An iterative numeric routine hit its limit before converging."""
