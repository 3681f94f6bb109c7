"""Shared exception types."""


class ConfigError(ValueError):
    """Invalid configuration: bad shapes, inconsistent flags, unknown keys."""


class UsageError(RuntimeError):
    """API misuse: stepping a finished episode, backward on a non-scalar, ..."""


class FormatError(ValueError):
    """Malformed serialized file. Carries the byte offset where parsing failed."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
