"""Exception types shared across the package.

Hard failures raise; soft outcomes (a region that does not trap, an unstable
census, ...) are returned as report objects by the modules that produce them.
"""


class AttractLabError(Exception):
    """Base class for all package errors."""


class InvalidPoint(AttractLabError, ValueError):
    pass


class RangeError(AttractLabError, ValueError):
    pass


class ParameterError(AttractLabError, ValueError):
    pass


class IndeterminacyHit(AttractLabError, ArithmeticError):
    """The polynomial lift vanished at the evaluated point."""


class SolverError(AttractLabError, RuntimeError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ResolutionError(AttractLabError, RuntimeError):
    def __init__(self, message, suggested_h=None):
        super().__init__(message)
        self.suggested_h = suggested_h


class EmptyCloud(AttractLabError, ValueError):
    pass


class NullSeed(AttractLabError, ValueError):
    pass


class BadMeasure(AttractLabError, ValueError):
    pass


class ConfigError(AttractLabError, ValueError):
    pass
