"""Streaming identification of linear dynamical systems.

Simulates first-order vector autoregressions and estimates their transition
matrix from a single trajectory with buffered reverse-replay SGD, its
row-sparse variant, and plain-SGD / recursive-least-squares baselines, plus
an experiment harness that runs the estimator comparison end to end.
"""

__version__ = "0.1.0"

from . import estimators, harness, linalg, metrics, model, replay  # noqa: E402,F401
from .errors import (  # noqa: F401
    ConfigError,
    ConvergenceError,
    DefinitenessError,
    DegenerateNormBound,
    DimensionError,
    StabilityError,
)
