"""Exception hierarchy."""
from __future__ import annotations


class HodgeLabError(Exception):
    pass


class InvalidHodgeTypeError(HodgeLabError, ValueError):
    pass


class ShapeError(HodgeLabError, ValueError):
    pass


class InvalidFrameError(HodgeLabError, ValueError):
    pass


class DegreeError(HodgeLabError, ValueError):
    pass


class NotInOrbitError(HodgeLabError):
    """A leading principal block sub-matrix is singular; ``k`` is its block index."""

    def __init__(self, k: int, det: float):
        super().__init__(f"leading block minor {k} is singular (|det| = {det:.3e})")
        self.k = k
        self.det = det


class ContractionViolationError(HodgeLabError):
    def __init__(self, norm: float):
        super().__init__(f"supremum operator norm {norm:.6g} is not < 1")
        self.norm = norm


class NonConvergenceError(HodgeLabError):
    def __init__(self, iterations: int, residual: float):
        super().__init__(f"no convergence after {iterations} iterations (last step {residual:.3e})")
        self.iterations = iterations
        self.residual = residual


class InadmissibleProblemError(HodgeLabError, ValueError):
    pass


class UnsupportedOracleError(HodgeLabError):
    pass


class FamilyError(HodgeLabError, ValueError):
    pass


class StepError(HodgeLabError, ValueError):
    pass
