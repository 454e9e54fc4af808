"""Exception types raised across the package."""


class PairMMDError(ValueError):
    """Base class for input and validation errors."""


class DuplicateRecord(PairMMDError):
    pass


class HeterogeneousKinds(PairMMDError):
    pass


class GridMismatch(PairMMDError):
    pass


class InvalidQuantileFunction(PairMMDError):
    pass


class DegenerateBandwidth(PairMMDError):
    pass


class IncompatibleAlpha(PairMMDError):
    pass


class DegenerateLabels(PairMMDError):
    pass


class SeparationError(PairMMDError):
    pass


class DegenerateScale(PairMMDError):
    pass


class InternalConsistencyError(RuntimeError):
    """A numerical invariant was violated beyond round-off; indicates a bug."""
