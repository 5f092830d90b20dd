"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid user-supplied configuration (bad spec, bad parameters)."""


class ParseError(ValueError):
    """Malformed input file; the message names the offending line."""


class NumericError(ArithmeticError):
    """Numerical failure (e.g. a covariance that cannot be factorized).

    When raised from a fitting loop, ``trace`` holds the iteration records
    produced up to the failure.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
