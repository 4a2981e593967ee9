"""Exception types shared across the package."""


class CausalPulseError(Exception):
    """Base class for all package errors."""


class IngestError(CausalPulseError):
    """A record in an input file could not be parsed.

    Carries the 1-based line number of the offending record when known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(CausalPulseError):
    """Invalid or inconsistent run configuration."""


class TransformError(CausalPulseError):
    """A series transform cannot be applied to its input."""


class AlignmentError(CausalPulseError):
    """Two calendar-indexed objects do not cover the same dates."""


class DegenerateSeriesError(CausalPulseError):
    """A series has no variation, so the requested statistic is undefined."""


class InsufficientDataError(CausalPulseError):
    """Not enough observations for the requested operation."""


class CollinearityError(CausalPulseError):
    """Regressor matrix is rank deficient."""

    def __init__(self, message: str, columns: tuple[str, ...] = ()):
        self.columns = columns
        if columns:
            message = f"{message}: {', '.join(columns)}"
        super().__init__(message)


class NonAnalysableError(CausalPulseError):
    """An event cannot be analysed because required data is missing.

    This is a first-class verdict, not a failure: callers record the
    reason and move on.
    """

    def __init__(self, message: str, missing_range: tuple | None = None):
        self.missing_range = missing_range
        super().__init__(message)


class FitFailureError(CausalPulseError):
    """Model estimation did not produce a finite optimum."""


class UndefinedEffectError(CausalPulseError):
    """The relative effect is undefined (observed total is zero)."""
