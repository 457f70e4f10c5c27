"""Exception hierarchy shared by all modules."""


class CvarWindError(Exception):
    """Base class for library errors."""


class ParseError(CvarWindError, ValueError):
    """Input file is malformed (header, timestamps, numbers)."""


class ValidationError(CvarWindError, ValueError):
    """Parsed values violate a data invariant."""


class DomainError(CvarWindError, ValueError):
    """Argument outside the domain of an operation."""


class AlignmentError(CvarWindError, ValueError):
    """Two time series cannot be put on a common time axis."""


class InsufficientDataError(CvarWindError, ValueError):
    """Too few usable rows to estimate a model.

    ``horizon`` and ``mode`` identify the offending partition when known.
    """

    def __init__(self, message, horizon=None, mode=None):
        super().__init__(message)
        self.horizon = horizon
        self.mode = mode
