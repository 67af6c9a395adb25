"""Event studies of pre-announcement news leaks: matching, abnormal returns and volumes, cross-sections."""

from .errors import LeakStudyError

__version__ = "0.1.0"
__all__ = ["LeakStudyError", "__version__"]
