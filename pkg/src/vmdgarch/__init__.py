"""Structural damage classification from VMD modes and GARCH coefficients.

Acceleration records are split into intrinsic mode functions by variational
mode decomposition, each mode is summarized by the coefficients of a fitted
GARCH model, the stacked coefficients are optionally reduced with kernel PCA
and kernel discriminant analysis, and the result is classified.
"""

from .errors import (
    ConfigError,
    DatasetEmptyError,
    DatasetError,
    DegenerateDataError,
    DegenerateSignalError,
    DivergenceError,
    MissingArtifactError,
    SingularSystemError,
    StageError,
    VmdGarchError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DatasetEmptyError",
    "DatasetError",
    "DegenerateDataError",
    "DegenerateSignalError",
    "DivergenceError",
    "MissingArtifactError",
    "SingularSystemError",
    "StageError",
    "VmdGarchError",
    "__version__",
]
