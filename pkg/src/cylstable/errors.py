"""Exception types raised across the package."""


class CylStableError(Exception):
    """Base class for all package errors."""


class QuadratureNonConvergence(CylStableError):
    """An integral could not be brought to the requested tolerance."""


class SingularArguments(CylStableError, ValueError):
    pass


class UnknownDomain(CylStableError, KeyError):
    pass


class GridTooLarge(CylStableError):
    pass


class PointOutsideDomain(CylStableError, ValueError):
    pass


class PreconditionViolated(CylStableError, ValueError):
    pass


class CombinatorialBudget(CylStableError):
    pass


class SamplingExhausted(CylStableError):
    pass


class PointBelowHyperplane(CylStableError, ValueError):
    pass


class StartOutsideDomain(CylStableError, ValueError):
    pass


class TruncationBudgetExceeded(CylStableError):
    """Paths kept surviving past the largest allowed horizon."""


class ZeroSurvivors(CylStableError):
    """No simulated path survived to the requested time."""


class DecayNotResolved(CylStableError):
    """Survival curve too flat or too noisy to fit an exponential rate."""


class ConfigError(CylStableError, ValueError):
    pass


class ExperimentError(CylStableError):
    """A module error raised inside an experiment, with the experiment and stage attached."""

    def __init__(self, experiment: str, stage: str, cause: Exception):
        super().__init__(f"{experiment} [{stage}]: {type(cause).__name__}: {cause}")
        self.experiment = experiment
        self.stage = stage
        self.cause = cause
