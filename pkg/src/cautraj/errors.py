"""Exception hierarchy shared by every cautraj module."""


class CautrajError(Exception):
    """Base class for all toolkit errors."""


# trajectory ingestion / case extraction
class MissingColumn(CautrajError, KeyError):
    pass


class NonMonotonicFrames(CautrajError, ValueError):
    pass


class InconsistentSamplingInterval(CautrajError, ValueError):
    pass


class VehicleNotFound(CautrajError, KeyError):
    pass


class InsufficientHistory(CautrajError, ValueError):
    pass


class NoInsertionFound(CautrajError, ValueError):
    pass


class StageWindowEmpty(CautrajError, ValueError):
    pass


# interaction risk
class DegenerateRect(CautrajError, ValueError):
    pass


# causal engine
class RankDeficient(CautrajError, ValueError):
    pass


class InsufficientData(CautrajError, ValueError):
    pass


class ZeroResidualVariance(CautrajError, ValueError):
    pass


class ModelNotFitted(CautrajError, RuntimeError):
    pass


# vehicle model / planner
class SteeringSingularity(CautrajError, ValueError):
    pass


class NonMonotonicAbscissa(CautrajError, ValueError):
    pass


class DimensionMismatch(CautrajError, ValueError):
    pass


class Infeasible(CautrajError, ValueError):
    pass


class NoProgress(CautrajError, RuntimeError):
    pass


# harness
class NoOverlapInTime(CautrajError, ValueError):
    pass


class ConfigError(CautrajError, ValueError):
    """Malformed or inconsistent configuration input."""


class IoFailure(CautrajError, OSError):
    pass
