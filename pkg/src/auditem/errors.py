"""Exception hierarchy shared across the auditem package."""


class AuditemError(Exception):
    """Base class for all errors raised by this package."""


class IngestionError(AuditemError):
    """A source file could not be parsed into batch subsets."""


class SchemaError(AuditemError):
    """A referenced column does not exist or a schema constraint is violated."""


class NotFoundError(AuditemError):
    """A requested batch, state key, or stored object does not exist."""


class DuplicateKeyError(AuditemError):
    """An on-ledger key already exists and may not be overwritten."""


class AuthorizationError(AuditemError):
    """The caller's identity is not allowed to perform the operation."""


class ValidationError(AuditemError):
    """An input value violates a contract precondition."""


class DecryptionError(AuditemError):
    """Authenticated decryption failed; the cause is intentionally opaque."""


class StorageError(AuditemError):
    """The content store backend failed to persist or read an object."""


class CorruptionError(StorageError):
    """Stored bytes no longer hash to their address."""


class IncomparableError(AuditemError):
    """Two verification attributes cannot be diffed (level or column mismatch)."""
