"""Exception hierarchy.

Errors split in two families so the CLI can map them to exit codes:
configuration problems (exit 1) and numerical failures (exit 2).
"""


class SDLTestError(Exception):
    """Base class for all package errors."""


class ConfigError(SDLTestError, ValueError):
    """Invalid user input or configuration."""


class NumericalError(SDLTestError, ArithmeticError):
    """A numerical routine could not produce a valid result."""


class InvalidCovarianceError(ConfigError):
    pass


class InvalidPrecisionError(ConfigError):
    pass


class InvalidParameterError(ConfigError):
    pass


class NonConvergenceError(NumericalError):
    def __init__(self, message, kkt_gap=None, iterations=None):
        super().__init__(message)
        self.kkt_gap = kkt_gap
        self.iterations = iterations


class CalibrationError(NumericalError):
    def __init__(self, message, endpoints=None):
        super().__init__(message)
        self.endpoints = endpoints


class DegenerateSupportError(NumericalError):
    pass


class ZeroScaleError(NumericalError):
    pass


class DegenerateSpreadError(NumericalError):
    pass


class NoFixedPointError(NumericalError):
    pass
