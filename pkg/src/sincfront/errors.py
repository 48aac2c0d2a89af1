"""Exception hierarchy shared by every module.

Each class carries the CLI exit code it maps to.
"""


class SincFrontError(Exception):
    exit_code = 1


class ConfigError(SincFrontError, ValueError):
    exit_code = 2


class DomainError(SincFrontError, ValueError):
    """An argument lies outside the domain where the operation is defined."""

    exit_code = 2


class ParameterDomainError(DomainError):
    """Cutoff parameters violate 0 <= f1 <= f2 <= 0.5."""


class SpecError(DomainError):
    pass


class ShapeError(SincFrontError, ValueError):
    exit_code = 2


class PreconditionError(SincFrontError, ValueError):
    exit_code = 2


class LabelError(SincFrontError, ValueError):
    exit_code = 2


class FormatError(SincFrontError, ValueError):
    exit_code = 2


class NumericError(SincFrontError, ArithmeticError):
    exit_code = 4

    def __init__(self, message, where=None):
        super().__init__(message if where is None else f"{where}: {message}")
        self.where = where
