"""Outage and insurer-ruin risk analysis for jammed heterogeneous wireless networks."""

__version__ = "0.1.0"

from .errors import (
    CalibrationError,
    ConfigError,
    InvalidParameterError,
    ManifestError,
    NoCoverageError,
    ResourceLimitError,
)

__all__ = [
    "__version__",
    "CalibrationError",
    "ConfigError",
    "InvalidParameterError",
    "ManifestError",
    "NoCoverageError",
    "ResourceLimitError",
]
