"""Exception hierarchy shared across the package."""


class TomuqError(Exception):
    """Base class for all package errors."""


class CorpusError(TomuqError):
    """Raised for malformed corpus files or invariant violations."""


class CalibrationError(TomuqError):
    """Raised when annotation pools are empty or targets cannot be built."""


class PromptError(TomuqError):
    """Raised when a prompt cannot be built for a dialogue."""


class CertaintyParseError(TomuqError):
    """Raised when a completion does not contain a usable certainty report."""


class BackendError(TomuqError):
    """Raised for transport failures and unknown synthetic dialogues."""


class ForecastError(TomuqError):
    """Raised when no valid forecast can be produced or inputs mismatch."""


class FitError(TomuqError):
    """Raised for degenerate designs and shape mismatches during fitting."""


class MetricError(TomuqError):
    """Raised for undefined metrics (constant inputs, empty or mismatched data)."""


class ConfigError(TomuqError):
    """Raised for invalid experiment configuration."""
