class CluStErrError(Exception):
    """Base class for all errors raised by clusterr."""


class DataError(CluStErrError, ValueError):
    """Input data is malformed or violates a shape requirement."""


class CSVParseError(DataError):
    """A CSV file could not be parsed into a numeric matrix."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegenerateNoiseError(CluStErrError, ArithmeticError):
    """The noise estimate is degenerate (zero variance or kappa undefined).

    The offending moment estimates are kept on the exception so callers can
    inspect how the estimate broke down.
    """

    def __init__(self, message, sigma2=None, theta4=None, method=None):
        self.sigma2 = sigma2
        self.theta4 = theta4
        self.method = method
        super().__init__(message)


class ConfigError(CluStErrError, ValueError):
    """Inconsistent or out-of-range configuration."""


class UndefinedRescalingError(CluStErrError, ArithmeticError):
    """An FDR rescaling quantile is (numerically) zero or negative."""
