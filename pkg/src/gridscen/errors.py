"""Exception and warning classes raised across the package."""


class GridScenError(Exception):
    """Base class for all package errors."""


class DataError(GridScenError):
    """Input data is unusable (missing units, gaps, bad timestamps)."""


class EmptyHour(DataError):
    pass


class DuplicateTimestamp(DataError):
    pass


class NoOverlap(DataError):
    pass


class UnitMismatch(DataError):
    pass


class InsufficientHistory(DataError):
    pass


class DegenerateSample(DataError):
    pass


class NoDaylight(DataError):
    pass


class MissingCoordinates(DataError):
    pass


class ZeroVariance(DataError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"columns with zero variance: {self.columns}")


class NonPSDInput(GridScenError):
    pass


class NotConverged(GridScenError):
    pass


class NotPSD(GridScenError):
    pass


class SingularConstraint(GridScenError):
    pass


class ConfigError(GridScenError):
    pass


class HeavyTailWarning(UserWarning):
    """A fitted GPD tail has shape >= 0.5 (infinite variance regime)."""


class FallbackWarning(UserWarning):
    """An estimator fell back to a simpler method."""


class ConvergenceWarning(UserWarning):
    pass


class RankDeficientWarning(UserWarning):
    pass
