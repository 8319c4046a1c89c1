"""Gap estimation for the transverse-field Ising model from simulated quantum time series."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigurationError,
    InternalConsistencyError,
    InvalidModelError,
    MissingSampleError,
    PipelineStageError,
    QGapError,
)

__all__ = [
    "__version__",
    "ConfigurationError",
    "InternalConsistencyError",
    "InvalidModelError",
    "MissingSampleError",
    "PipelineStageError",
    "QGapError",
]
