"""Exception types shared across the library."""


class SinecastError(Exception):
    """Base class for all library errors."""


class ShapeError(SinecastError):
    """Tensor dimensions do not conform for the requested operation."""


class GraphError(SinecastError):
    """Autodiff contract violation (e.g. backward on a non-scalar)."""


class DataError(SinecastError):
    """Dataset could not be loaded or is malformed."""


class StandardizeError(SinecastError):
    """Standardization statistics cannot be fitted or applied."""


class ConfigError(SinecastError):
    """Invalid model or experiment configuration."""


class NumericError(SinecastError):
    """Non-finite value encountered during computation."""


class TuningError(SinecastError):
    """Hyperparameter grid has no feasible point."""
