"""Exception types raised across the package."""


class MpeaError(Exception):
    """Base class for all package errors."""


class NotHermitian(MpeaError, ValueError):
    pass


class DimensionMismatch(MpeaError, ValueError):
    pass


class Defective(MpeaError, ArithmeticError):
    """The eigenvector matrix is too ill-conditioned to trust a diagonalisation."""

    def __init__(self, condition: float, threshold: float):
        self.condition = condition
        self.threshold = threshold
        super().__init__(
            f"eigenvector matrix condition {condition:.3e} exceeds {threshold:.1e}; "
            "matrix is (numerically) defective"
        )


class CutoffTooSmall(MpeaError, ValueError):
    pass


class InvalidDensityMatrix(MpeaError, ValueError):
    pass


class ZeroProbability(MpeaError, ArithmeticError):
    """Post-selection on the measurement outcome is impossible."""


class NonInvertible(MpeaError, ValueError):
    pass


class AmbiguousQuadrant(MpeaError, ValueError):
    pass


class InsufficientContrast(MpeaError, RuntimeError):
    """A phase bit could not be decided from the sampled statistic."""

    def __init__(self, bit: int, statistic: float, margin: float):
        self.bit = bit
        self.statistic = statistic
        self.margin = margin
        super().__init__(
            f"bit {bit}: decision statistic {statistic:+.3e} is inside the noise margin {margin:.3e}"
        )


class ScenarioError(MpeaError, ValueError):
    """A scenario file is malformed or inconsistent."""
