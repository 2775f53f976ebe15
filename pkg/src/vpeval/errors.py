"""Exception types shared across the package.

Every failure mode raises a typed error so batch runs fail loudly and
callers can distinguish bad inputs from bad backends.
"""


class VpevalError(Exception):
    """Base class for all errors raised by this package."""


class ManifestParseError(VpevalError):
    """Malformed manifest row or header; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ValidationError(VpevalError):
    """Input violates a documented precondition or invariant."""


class ConfigurationError(VpevalError):
    """Configuration value is missing, inconsistent, or unusable."""


class FormatError(VpevalError):
    """Malformed binary payload (raw image or wire tensor); names the field."""

    def __init__(self, message: str, field: str = ""):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class ProtocolError(VpevalError):
    """Backend sent a response that violates the wire contract."""


class CapabilityError(VpevalError):
    """Backend cannot serve the requested operation."""


class ComputationError(VpevalError):
    """Numeric result left the representable/finite domain."""


class UndefinedMetricError(VpevalError):
    """Metric is mathematically undefined for this input (degenerate split)."""


class ExperimentError(VpevalError):
    """A run aborted; message names the offending record or configuration."""
