"""Exception types shared across the package."""


class EerlabError(Exception):
    """Base class for package errors."""


class ConfigError(EerlabError, ValueError):
    """Invalid experiment or strategy configuration."""


class InvalidTensorError(EerlabError, ValueError):
    """A posterior-predictive tensor violates its invariants."""


class NumericalError(EerlabError, ArithmeticError):
    """A quantity that must be nonnegative came out clearly negative."""


class TrainingError(EerlabError, RuntimeError):
    """Model training diverged."""

    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


class ImpossibleObservationError(EerlabError, ValueError):
    """Every hypothesis assigns zero probability to an observed label."""


class EnumerationTooLargeError(EerlabError, ValueError):
    """An exact enumeration would exceed the supported size."""
