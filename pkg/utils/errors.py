"""Typed failures raised across the latticewave modules.

Each error carries the process exit code the driver reports for it:
2 for invalid input or geometry, 3 for budget and convergence failures.
"""

from typing import Optional

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BUDGET = 3


class LatticeWaveError(Exception):
    """Base class for every latticewave failure."""

    exit_code = EXIT_VALIDATION


# Validation family -------------------------------------------------------

class SingularPoint(LatticeWaveError):
    "Raised when ω vanishes (m⋆ = 0 at a lattice multiple of 2π)."


class SecPole(LatticeWaveError):
    "Raised when a coordinate sits on a pole of sec ξⱼ."


class ClassificationConflict(LatticeWaveError):
    "Raised when the eigenvalue corank disagrees with the symbolic stratum label."

    def __init__(self, message: str, eigen_corank: int, symbolic_corank: int):
        super().__init__(message)
        self.eigen_corank = eigen_corank
        self.symbolic_corank = symbolic_corank


class NotCritical(LatticeWaveError):
    "Raised when a Taylor base point is not a critical point of φ(v, ·)."


class DimensionMismatch(LatticeWaveError):
    pass


class PolySyntaxError(LatticeWaveError):
    """Raised by the polynomial parser.

    Args:
        message: what went wrong
        position: zero-based offset into the parsed text
    """

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class NegativeExponent(PolySyntaxError):
    pass


class Degenerate(LatticeWaveError):
    "Raised for inputs with empty support."


class FaceNotFound(LatticeWaveError):
    pass


class NotApplicable(LatticeWaveError):
    "Raised when the premise geometry of a criterion does not hold."


class InsufficientRange(LatticeWaveError):
    pass


class BoxTooSmall(LatticeWaveError):
    def __init__(self, message: str, side: int, required: int):
        super().__init__(message)
        self.side = side
        self.required = required


class ConfigError(LatticeWaveError):
    pass


class InfeasibleError(LatticeWaveError):
    "Raised when a linear program has no feasible point."


class UnboundedError(LatticeWaveError):
    "Raised when a linear program is unbounded."


# Budget / convergence family --------------------------------------------

class BudgetExceeded(LatticeWaveError):
    exit_code = EXIT_BUDGET

    def __init__(self, message: str, requested: Optional[float] = None, budget: Optional[float] = None):
        super().__init__(message)
        self.requested = requested
        self.budget = budget


class NotConverged(LatticeWaveError):
    exit_code = EXIT_BUDGET

    def __init__(self, message: str, history: Optional[list] = None):
        super().__init__(message)
        self.history = history or []


class TooLarge(LatticeWaveError):
    exit_code = EXIT_BUDGET


class Blowup(LatticeWaveError):
    exit_code = EXIT_BUDGET

    def __init__(self, message: str, t: float, sup_norm: float):
        super().__init__(message)
        self.t = t
        self.sup_norm = sup_norm


class MeanNotZero(UserWarning):
    "Input to 1/D carried a nonzero mean; the zero mode was dropped."
