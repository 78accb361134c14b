"""Exception types shared across the package.

Every failure mode the public API promises to surface has its own type so
callers (and tests) can distinguish them without string matching.
"""


class DimensionError(ValueError):
    """Operand shapes are incompatible with the operation's contract."""


class ConvergenceError(RuntimeError):
    """An iterative routine hit its iteration cap before reaching tolerance.

    Carries the best iterate seen so far in ``best`` so callers can decide
    whether a degraded answer is acceptable.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class StabilityError(RuntimeError):
    """A computation requires a stable system (or step size) and did not get one."""


class DefinitenessError(ValueError):
    """A matrix required to be positive definite is not."""


class DegenerateNormBound(ValueError):
    """The data prefix used to calibrate the norm bound was identically zero."""


class ConfigError(ValueError):
    """An experiment configuration violates an invariant; message names it."""
