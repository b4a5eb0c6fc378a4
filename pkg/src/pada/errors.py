"""Exception hierarchy shared by every module of the package."""


class PadaError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(PadaError, ValueError):
    """Operand shapes are incompatible."""


class ParameterError(PadaError, ValueError):
    """An argument is outside its valid range."""


class DistributionError(PadaError, ValueError):
    """Rows that should be probability distributions are not."""


class DegenerateWeightsError(PadaError, ValueError):
    """A class-weight vector cannot be normalized."""


class WeightStateError(PadaError, ValueError):
    """Class weights are in the wrong normalization state for the call."""


class DivergenceError(PadaError, ArithmeticError):
    """Training produced a non-finite loss or parameter."""

    def __init__(self, step: int, message: str = "non-finite loss"):
        super().__init__(f"{message} at step {step}")
        self.step = step


class NumericalError(PadaError, ArithmeticError):
    """An operation produced NaN or Inf."""


class UnavailableMetricError(PadaError, LookupError):
    """A metric needs target labels that the dataset does not carry."""


class DataFormatError(PadaError, ValueError):
    """A data or history file could not be parsed."""

    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


class ConfigError(PadaError, ValueError):
    """An experiment configuration key is unknown or malformed."""

    def __init__(self, key: str, message: str):
        super().__init__(f"config key {key!r}: {message}")
        self.key = key
