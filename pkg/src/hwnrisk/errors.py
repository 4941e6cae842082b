class InvalidParameterError(ValueError):
    """A model parameter is outside its admissible range."""


class ResourceLimitError(RuntimeError):
    """A request would exceed a configured size cap."""


class NoCoverageError(RuntimeError):
    """No base station of any tier is available to serve the user."""


class CalibrationError(RuntimeError):
    """Premium bisection could not bracket the target ruin probability."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class ConfigError(ValueError):
    """Scenario configuration failed to parse or validate.

    ``field`` carries the dotted path of the offending entry.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class ManifestError(RuntimeError):
    """A run manifest is unreadable or does not match its results."""
