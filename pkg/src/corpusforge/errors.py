"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations


class CorpusforgeError(Exception):
    """Base class for all toolkit errors."""


class ManifestError(CorpusforgeError):
    """Malformed manifest content or a record violating its invariants."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class AudioFormatError(CorpusforgeError):
    """Unsupported or unreadable audio payload."""


class UnexpandableNumberError(CorpusforgeError):
    """A digit token the active number lexicon cannot verbalize."""

    def __init__(self, token: str):
        self.token = token
        super().__init__(f"cannot expand number token {token!r}")


class MappingError(CorpusforgeError):
    """Invalid or ambiguous digit-to-spoken-form span mapping."""


class AdapterError(CorpusforgeError):
    """Failure reported by an external model adapter."""


class AdapterTransportError(AdapterError):
    """Adapter process or connection failure; the batch is retryable."""


class TimestampRangeError(CorpusforgeError):
    """Timestamp outside the quantizable range."""


class ConfigError(CorpusforgeError):
    """Invalid pipeline configuration."""
