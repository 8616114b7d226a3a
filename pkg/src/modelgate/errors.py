"""Exception hierarchy shared across the package.

``ValidationError`` covers bad inputs a caller can fix (maps to CLI exit
code 2); the other ``ModelgateError`` subclasses are data-dependent runtime
failures (exit code 3).
"""


class ModelgateError(Exception):
    """Base class for every error this package raises on purpose."""


class ValidationError(ModelgateError, ValueError):
    """Input violates a documented invariant or precondition."""


class DegenerateLabelsError(ModelgateError):
    """All-correct or all-incorrect samples: nothing to fit."""


class AmbiguousCorrelationError(ModelgateError):
    """Two model events share one correlation ID inside a window."""


class ProvenanceError(ModelgateError):
    """Artifact was built for a different base model."""


class InsufficientDataError(ModelgateError):
    """Not enough observations to run the requested operation."""
