class TrajTreeError(Exception):
    """Base class for package errors."""

    exit_code = 1


class InvalidInputError(TrajTreeError, ValueError):
    exit_code = 2


class ConfigError(TrajTreeError, ValueError):
    exit_code = 2


class DataError(TrajTreeError):
    exit_code = 3


class NumericalError(TrajTreeError, ArithmeticError):
    exit_code = 4
