"""Shared exception types and process exit codes."""


class ValidationError(ValueError):
    """Bad input: out-of-range field, malformed record, unknown predicate field."""


class StoreIOError(OSError):
    """Unreadable/unwritable store, checksum mismatch, truncated partition."""


EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
