"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class ResourceError(MemoryError):
    """Requested simulation would exceed the configured memory budget."""


class CacheError(IOError):
    """Base class for critical-value cache problems."""


class CacheVersionError(CacheError):
    """Cache file was written with an incompatible format version."""


class CacheCorruptError(CacheError):
    """Cache file is truncated or its header is unreadable."""


class ScenarioError(RuntimeError):
    """A simulation scenario could not be drawn."""


class NumericInputError(ValueError):
    """Observations contain NaN or infinite values."""
