"""Exception hierarchy shared by the library and the command line."""


class CbnError(Exception):
    """Base class for every error raised by cbnquery."""

    exit_code = 1


class ModelError(CbnError):
    """A CBN is malformed or an operation was given an unknown variable/value."""

    exit_code = 3


class FormulaError(CbnError):
    """A formula could not be parsed or does not fit the model it is bound to."""

    exit_code = 2

    def __init__(self, message, text=None, pos=None):
        super().__init__(message)
        self.message = message
        self.text = text
        self.pos = pos

    def __str__(self):
        if self.text is None or self.pos is None:
            return self.message
        return "%s at column %d\n  %s\n  %s^" % (
            self.message, self.pos + 1, self.text, " " * self.pos)


class CapExceeded(CbnError):
    """An enumeration would exceed the configured size cap."""

    exit_code = 4


class UndefinedConditional(CbnError):
    """A conditional probability was requested on a zero-probability event."""

    exit_code = 5


class QueryError(CbnError):
    """A counterfactual query does not meet its preconditions."""

    exit_code = 7


class DataError(CbnError):
    """A dataset is missing columns or holds values outside declared domains."""

    exit_code = 6
