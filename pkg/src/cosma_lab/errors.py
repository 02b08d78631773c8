"""Exception types shared across the package."""


class CosmaLabError(Exception):
    """Base class for all package errors."""


class SizeCapError(CosmaLabError):
    """An instance exceeds a configured safety cap."""


class InfeasibleError(CosmaLabError):
    """The requested configuration cannot be realized (memory, capacity...)."""


class IllegalMoveError(CosmaLabError):
    """A pebbling move violates the game rules.

    Attributes:
        index: 0-based position of the offending move in the sequence.
        reason: short description of the violated rule.
    """

    def __init__(self, index: int, reason: str):
        self.index = index
        self.reason = reason
        super().__init__(f"illegal move at index {index}: {reason}")


class IncompleteCalculationError(CosmaLabError):
    """A move sequence ended without blue-pebbling every output."""


class SimulationInvariantError(CosmaLabError):
    """An internal invariant of the rank simulator failed."""
