"""Exception types shared across the pipeline."""


class SchemaError(ValueError):
    """A feature table or config does not declare what the schema requires."""


class DataValidationError(ValueError):
    """A loaded value violates a data invariant (non-finite, unknown label, ...)."""


class DegenerateTensorError(ValueError):
    """Tensor shape indices requested for a tensor with no positive eigenvalue."""


class ConvergenceError(RuntimeError):
    """An iterative solver exhausted its iteration budget."""
