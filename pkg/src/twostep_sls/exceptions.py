"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Raised when matrix or transfer-matrix shapes are incompatible."""


class TailError(RuntimeError):
    """Raised when a truncated inverse or impulse response has not decayed."""


class InfeasibleError(RuntimeError):
    """The requested equality constraints restricted to free entries have no solution.

    Carries the two ranks of the Rouché-Capelli test when available.
    """

    def __init__(self, message, rank=None, rank_augmented=None):
        super().__init__(message)
        self.rank = rank
        self.rank_augmented = rank_augmented


class UnstableError(RuntimeError):
    """Raised when an implementation's internal dynamics are not stable."""
