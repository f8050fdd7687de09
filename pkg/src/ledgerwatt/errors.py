"""Exception hierarchy shared across the package."""

from __future__ import annotations


class LedgerWattError(Exception):
    """Base class for every error raised by ledgerwatt."""


class UnitError(LedgerWattError, ValueError):
    """Units are unknown or measure different dimensions."""


class InsufficientDataError(LedgerWattError, ValueError):
    pass


class MonotonicityError(LedgerWattError, ValueError):
    """A combining function produced a triple that is not ordered."""


class InvalidObservationError(LedgerWattError, ValueError):
    pass


class IncompleteProfileError(LedgerWattError, ValueError):
    pass


class InvalidProfileError(LedgerWattError, ValueError):
    pass


class UndefinedCorrelationError(LedgerWattError, ValueError):
    pass


class SingularDesignError(LedgerWattError, ValueError):
    pass


class InvalidParameterError(LedgerWattError, ValueError):
    pass


class UnknownEntryError(LedgerWattError, KeyError):
    pass


class NoDataError(LedgerWattError, ValueError):
    pass


class SchemaError(LedgerWattError, ValueError):
    """A file or payload does not match its documented schema."""

    def __init__(self, message: str, *, field: str | None = None, row: int | None = None):
        self.field = field
        self.row = row
        where = []
        if row is not None:
            where.append(f"row {row}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ValidationError(LedgerWattError, ValueError):
    pass


class GapError(LedgerWattError, ValueError):
    """A daily series is missing one or more dates."""

    def __init__(self, missing):
        self.missing = list(missing)
        shown = ", ".join(d.isoformat() for d in self.missing)
        super().__init__(f"series is missing {len(self.missing)} day(s): {shown}")


class NetworkError(LedgerWattError):
    """Transport failure talking to a remote endpoint (retryable)."""


class ConfigError(LedgerWattError, ValueError):
    pass
