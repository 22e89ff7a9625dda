"""Shallow and simplified-attention forecasters for long-horizon time series."""

from .autodiff import Parameter, Tensor, backward, grad_check
from .errors import (
    ConfigError,
    DataError,
    GraphError,
    NumericError,
    ShapeError,
    SinecastError,
    StandardizeError,
    TuningError,
)

__version__ = "0.1.0"
