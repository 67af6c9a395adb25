"""Exception hierarchy. Every error carries a short machine-readable code."""


class LeakStudyError(Exception):
    code = "ERROR"
    exit_status = 1

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context

    def one_line(self):
        extras = " ".join(f"{k}={v}" for k, v in sorted(self.context.items()))
        msg = str(self).replace("\n", " ")
        return f"error code={self.code}{' ' + extras if extras else ''}: {msg}"


class DomainError(LeakStudyError, ValueError):
    code = "DOMAIN"
    exit_status = 2


class OrderingError(LeakStudyError, ValueError):
    code = "ORDERING"
    exit_status = 2


class IngestError(LeakStudyError, ValueError):
    """Bad input file. ``row`` is 1-based counting the header as row 1."""

    code = "INGEST"
    exit_status = 3


class DataError(LeakStudyError, ValueError):
    code = "DATA"
    exit_status = 3


class CalendarGapError(LeakStudyError, LookupError):
    code = "CALENDAR_GAP"
    exit_status = 4


class FxGapError(LeakStudyError, LookupError):
    code = "FX_GAP"
    exit_status = 5


class FactorGapError(LeakStudyError, LookupError):
    code = "FACTOR_GAP"
    exit_status = 6


class ThinHistoryError(LeakStudyError, ValueError):
    code = "THIN_HISTORY"
    exit_status = 7


class InsufficientHistoryError(LeakStudyError, ValueError):
    code = "INSUFFICIENT_HISTORY"
    exit_status = 7


class InsufficientBaselineError(LeakStudyError, ValueError):
    code = "INSUFFICIENT_BASELINE"
    exit_status = 7


class SingularDesignError(LeakStudyError, ValueError):
    code = "SINGULAR_DESIGN"
    exit_status = 8


class EmptySampleError(LeakStudyError, ValueError):
    code = "EMPTY_SAMPLE"
    exit_status = 9


class ConfigError(LeakStudyError, ValueError):
    code = "CONFIG"
    exit_status = 10
