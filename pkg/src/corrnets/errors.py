"""Exception types shared across the package."""


class CorrnetsError(Exception):
    """Base class for all package errors."""


class DataError(CorrnetsError):
    """Malformed or inconsistent input data."""


class AlignmentError(DataError):
    """Series cannot be placed on a common time axis."""


class EmptyPanelError(DataError):
    """An operation produced or received a panel with no usable rows."""


class DegenerateSeriesError(DataError):
    """A series has zero variance where a correlation is required."""


class ConfigError(CorrnetsError):
    """Invalid configuration, schedule, or derivation spec."""


class NumericError(CorrnetsError):
    """A numerical routine failed to converge or returned garbage."""


class AnalysisError(CorrnetsError):
    """A well-formed request has no answer on this data."""
