"""Exception taxonomy shared across the toolkit.

Callers can distinguish a parameter outside the model's domain, a model
regime the theory deliberately excludes, a sample too small for a tail
diagnostic, and a violated structural invariant.
"""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class DomainError(ToolkitError, ValueError):
    """A parameter or argument lies outside the documented domain."""


class ModelExclusionError(DomainError):
    """A regime the model explicitly excludes (e.g. a driftless walk)."""


class ConfigError(ToolkitError, ValueError):
    """An experiment configuration failed strict validation."""


class InsufficientDataError(ToolkitError, RuntimeError):
    """Too few samples for the requested tail diagnostic."""


class InvariantViolationError(ToolkitError, RuntimeError):
    """A structural invariant of a data object does not hold."""
