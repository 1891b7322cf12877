"""Exception hierarchy shared by the library and the CLI."""


class MaxExpError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 2


class InputError(MaxExpError, ValueError):
    """Invalid arguments or data (bad probabilities, shape mismatch, ...)."""


class ParseError(InputError):
    """A file could not be parsed; the message names the row and column."""


class ReferentialError(ParseError):
    """A file references an id that is not part of the declared universe."""


class LimitError(MaxExpError):
    """A request exceeds a configured computational limit."""

    exit_code = 3


class UsageError(MaxExpError):
    """Invalid command-line usage."""

    exit_code = 1
