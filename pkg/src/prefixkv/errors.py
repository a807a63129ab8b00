"""Exception types shared across the store."""


class PrefixKvError(Exception):
    """Base class for all store errors."""


class UsageError(PrefixKvError):
    """Caller violated an operation precondition."""


class CorruptionError(PrefixKvError):
    """On-disk state failed a checksum or structural check."""


class StaleLocationError(PrefixKvError):
    """A tensor-log location points at a file that no longer exists."""


class UnrecoverableError(PrefixKvError):
    """Recovery failed: no intact manifest version is available."""
