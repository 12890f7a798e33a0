"""Exception hierarchy. Each class maps onto one CLI exit code."""


class RaincheckError(Exception):
    exit_code = 1


class ConfigError(RaincheckError):
    """Run configuration is invalid."""

    exit_code = 2


class InputError(RaincheckError):
    """An input file is unreadable or malformed beyond recovery."""

    exit_code = 3


class ParseError(InputError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class ValidationError(InputError):
    """A parsed value violates a documented bound."""


class GridFormatError(InputError):
    pass


class InvariantError(RaincheckError):
    """Internal consistency check failed."""

    exit_code = 4


class DegenerateOccurrence(ValueError):
    """Binary outcome has a single class, so the logistic MLE does not exist."""
