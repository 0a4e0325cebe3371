"""Exception hierarchy shared across the toolkit.

Each class maps to one CLI exit-code family (see cli.py): configuration,
I/O, wire-protocol, and data-validation failures are distinguishable by
type so callers can react without parsing messages.
"""


class TextDiarError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(TextDiarError):
    """Invalid configuration value (bad window length, threshold, mode...)."""


class ValidationError(TextDiarError):
    """Input data violates a documented invariant."""


class ParseError(ValidationError):
    """Malformed transcript/prediction record.

    Carries the 1-based line number of the offending record when known.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ProtocolError(TextDiarError):
    """Remote predictor returned a non-conforming response."""


class TransportError(TextDiarError):
    """Remote predictor unreachable after the configured retries."""
