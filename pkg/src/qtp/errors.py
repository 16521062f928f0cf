"""Exception hierarchy; each class maps to a CLI exit code."""


class QTPError(Exception):
    exit_code = 1


class ConfigError(QTPError):
    exit_code = 2


class DataError(QTPError):
    exit_code = 3


class DomainError(DataError, ValueError):
    """Argument outside an operation's domain (bad index, shape, length)."""


class FramingError(DataError, ValueError):
    pass


class DivergenceError(QTPError):
    exit_code = 4
