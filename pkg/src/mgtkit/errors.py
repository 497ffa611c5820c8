"""Exception hierarchy shared across the toolkit.

Two branches matter for the CLI exit-code contract: ConfigError maps to
exit code 1 (bad flags / bad parameter combinations), DataError and its
subclasses map to exit code 2 (problems with the content of input data).
"""


class ToolkitError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ToolkitError):
    """Invalid configuration: bad flag values, impossible parameter combos."""


class DataError(ToolkitError):
    """Problem with the content of input data."""


class ParseError(DataError):
    """Malformed input line; carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class ValidationError(DataError):
    """A record or value violates a documented invariant."""


class CapabilityError(DataError):
    """A record lacks a stream or auxiliary series a detector requires."""

    def __init__(self, missing: str, record_id: str | None = None):
        where = f" in record {record_id!r}" if record_id else ""
        super().__init__(f"missing {missing}{where}")
        self.missing = missing
        self.record_id = record_id


class DegenerateScoreError(DataError):
    """A score is undefined: zero denominator or zero spread."""


class DegenerateStatsError(DataError):
    """Global statistics are degenerate (latter part too short)."""


class FitError(DataError):
    """Training or validation data cannot support fitting."""


class SplitError(DataError):
    """A corpus cannot be partitioned as requested."""


class MetricError(DataError):
    """A metric is undefined on the given scores/labels."""
