"""Exception hierarchy shared by all modules."""


class SubtractSimError(Exception):
    """Base class for every error raised by this package."""


class DomainError(SubtractSimError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigError(SubtractSimError, ValueError):
    """A configuration is malformed or internally inconsistent."""


class ImpossibleEventError(SubtractSimError):
    """The heralding event has zero probability, so the state cannot be normalised."""


class UnsupportedStructureError(SubtractSimError):
    """A fast path was requested for blocks that lack the structure it relies on."""


class ResourceError(SubtractSimError):
    """A requested computation would exceed the memory budget."""


class PrecisionWarning(UserWarning):
    """A truncated series hit its term cap before meeting its tolerance."""
