"""
Error hierarchy for LoadShuffle.

Every error carries the CLI exit code it maps to:
0 success, 1 config error, 2 data error, 3 modelling error.
"""


class LoadForecastError(Exception):
    """Base class for all pipeline errors."""

    exit_code: int = 1
    error: str = "Pipeline error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


# ============================================================================
# CONFIGURATION
# ============================================================================

class ConfigError(LoadForecastError):
    """Invalid run configuration, feature grid or CLI arguments."""

    exit_code = 1
    error = "Config error"


# ============================================================================
# DATA
# ============================================================================

class DataError(LoadForecastError):
    exit_code = 2
    error = "Data error"


class IngestError(DataError):
    """A CSV row could not be parsed."""

    error = "Ingest error"


class SchemaError(DataError):
    """A mapped column is missing from the input file."""

    error = "Schema error"


class NormalizationError(DataError):
    """A day has more DST gaps or duplicates than the calendar allows."""

    error = "Normalization error"


class DataQualityError(DataError):
    """Missing or invalid data outside the DST rules."""

    error = "Data quality error"


class AlignmentError(DataError):
    """Series that must share a timestamp grid do not."""

    error = "Alignment error"


class CoverageError(DataError):
    """Inputs do not cover the hours a computation needs."""

    error = "Coverage error"


# ============================================================================
# MODELLING
# ============================================================================

class ModellingError(LoadForecastError):
    exit_code = 3
    error = "Modelling error"


class InsufficientDataError(ModellingError):
    """Fewer rows than columns + 1 in a least-squares problem."""

    error = "Insufficient data"


class TrainingError(ModellingError):
    error = "Training error"


# ============================================================================
# NUMERIC DOMAIN
# ============================================================================

class DomainError(LoadForecastError, ValueError):
    """Argument outside the mathematical domain of a pure function."""

    exit_code = 3
    error = "Domain error"
