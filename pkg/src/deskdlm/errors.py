"""Exception types shared across the engine."""


class DeskDlmError(Exception):
    """Base class for engine errors."""


class ConfigError(DeskDlmError):
    """Invalid user-supplied configuration or input file. CLI exit code 2."""


class StaleCacheError(DeskDlmError):
    """A KV cache was used after the sequence it was built from changed."""


class InvariantViolation(DeskDlmError):
    """An internal consistency check failed. CLI exit code 3."""
