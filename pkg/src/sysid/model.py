"""System definition, data streams, and hyperparameter selection.

The data model is a first-order vector autoregression: a state vector evolves
as X_{t+1} = A X_t + eta_t with eta_t drawn i.i.d. from N(0, Sigma). For a
stable A the chain mixes toward a stationary Gaussian whose covariance G
solves the fixed-point equation G = A G A^T + Sigma.

Streams are exposed both as a lazy generator (``var_stream``) and as a
materializing call (``simulate``); the two share one chunked code path, so a
given (system, start, seed) triple produces the identical sample sequence
either way.

Hyperparameter selection offers two presets for the buffered estimators:

* ``theory``: conservative settings driven by an exponent ``alpha``: gap
  u = ceil(alpha ln T / ln(1/||A||)), buffer size B = 10u, squared-norm bound
  R = c tr(Sigma) ln T / (1 - ||A||^2), step size 1/(8RB), and tail averaging
  over the last half of the buffers.
* ``experiment``: the small fixed buffers used by the default comparison:
  B = 100, u = 10, step size 1/(2R) with R calibrated on a short data prefix,
  and a burn-in of floor(ln T) buffers.

``gelfand_gap`` covers systems whose spectral radius is below one while the
spectral norm is not; transients can then grow before they decay, and the
buffer gap must absorb the growth factor, which scales with the dimension.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels, linalg
from .errors import (
    ConfigError,
    DefinitenessError,
    DegenerateNormBound,
    DimensionError,
    StabilityError,
)

START_MODES = ("zero", "stationary")

# Samples are produced in blocks of this size; the block boundary is fixed so
# that lazy and materializing consumers see bit-identical streams.
_STREAM_CHUNK = 8192


@dataclass(frozen=True)
class SystemSpec:
    """Ground-truth system driving a stream.

    transition        d x d state-transition matrix
    noise_cov         d x d noise covariance (symmetric PSD)
    noise_chol        cached factor with noise_chol @ noise_chol.T == noise_cov
    transition_norm   recorded spectral norm of the transition matrix
    """

    transition: np.ndarray
    noise_cov: np.ndarray
    noise_chol: np.ndarray
    transition_norm: float

    @property
    def dim(self) -> int:
        return self.transition.shape[0]


def _psd_factor(noise_cov):
    # Exactly-diagonal covariances (including the zero matrix) are factored
    # entrywise so that noise-free and scalar-noise systems do not need a
    # strictly positive-definite Cholesky.
    diag = np.diag(np.diag(noise_cov))
    if np.array_equal(noise_cov, diag):
        d = np.diag(noise_cov)
        if np.any(d < 0):
            raise DefinitenessError("noise covariance has a negative diagonal")
        return np.diag(np.sqrt(d))
    return linalg.cholesky(noise_cov)


def make_system(transition, noise_cov):
    """Validate and package a system, caching the noise factor and ||A||."""
    transition = np.asarray(transition, dtype=np.float64)
    noise_cov = np.asarray(noise_cov, dtype=np.float64)
    if transition.ndim != 2 or transition.shape[0] != transition.shape[1]:
        raise DimensionError(f"transition must be square, got shape {transition.shape}")
    if noise_cov.shape != transition.shape:
        raise DimensionError(
            f"noise covariance shape {noise_cov.shape} does not match transition {transition.shape}"
        )
    if not (np.all(np.isfinite(transition)) and np.all(np.isfinite(noise_cov))):
        raise ValueError("system matrices must be finite")
    scale = max(float(np.abs(noise_cov).max()), 1.0)
    if float(np.abs(noise_cov - noise_cov.T).max()) > 1e-12 * scale:
        raise ValueError("noise covariance must be symmetric")
    norm = linalg.spectral_norm(transition)
    if norm >= 1.0:
        warnings.warn(
            f"transition matrix has spectral norm {norm:.4g} >= 1; "
            "streams from this system may be unstable",
            RuntimeWarning,
            stacklevel=2,
        )
    return SystemSpec(
        transition=transition,
        noise_cov=noise_cov,
        noise_chol=_psd_factor(noise_cov),
        transition_norm=norm,
    )


def rand_bimod(d, rho, rng):
    """Random symmetric transition matrix with a two-level spectrum.

    Draws a Haar orthogonal U (QR of an i.i.d. Gaussian matrix with the sign
    convention that makes the factorization unique) and returns U L U^T where
    L has ceil(d/2) eigenvalues at rho and the rest at rho/3.
    """
    if d < 1:
        raise DimensionError(f"d must be >= 1, got {d}")
    if rho <= 0:
        raise ValueError(f"rho must be positive, got {rho}")
    if rho >= 1:
        warnings.warn(
            f"rho={rho} >= 1 yields an unstable system", RuntimeWarning, stacklevel=2
        )
    z = rng.standard_normal((d, d))
    q, r = np.linalg.qr(z)
    q = q * np.sign(np.diag(r))
    eigs = np.full(d, rho / 3.0)
    eigs[: math.ceil(d / 2)] = rho
    a = (q * eigs) @ q.T
    return 0.5 * (a + a.T)


def _start_vector(system, start, rng, x0):
    if x0 is not None:
        x0 = np.asarray(x0, dtype=np.float64)
        if x0.shape != (system.dim,):
            raise DimensionError(f"x0 must have shape ({system.dim},), got {x0.shape}")
        return x0.copy()
    if start == "zero":
        return np.zeros(system.dim)
    if start == "stationary":
        if system.transition_norm >= 1.0:
            raise StabilityError(
                "stationary start requires spectral norm < 1, got "
                f"{system.transition_norm:.4g}"
            )
        g = linalg.solve_lyapunov(system.transition, system.noise_cov)
        return _psd_factor(g) @ rng.standard_normal(system.dim)
    raise ConfigError(f"unknown start mode {start!r}; expected one of {START_MODES}")


def _stream_blocks(system, start, rng, x0, chunk):
    x = _start_vector(system, start, rng, x0)
    yield x.reshape(1, -1)
    out = np.empty((chunk, system.dim))
    while True:
        noise = rng.standard_normal((chunk, system.dim)) @ system.noise_chol.T
        _kernels.var_recursion(system.transition, x, noise, out)
        x = out[-1].copy()
        yield out
        out = np.empty((chunk, system.dim))


def var_stream(system, start="zero", rng=None, x0=None):
    """Lazy sample stream X_0, X_1, ... of the system's state recursion.

    X_0 is the zero vector, a stationary draw, or the explicit ``x0``;
    every later sample is transition @ previous + fresh Gaussian noise.
    The stream is infinite; consumers take the horizon they need.
    """
    if rng is None:
        raise ValueError("var_stream requires an rng (np.random.Generator)")
    for block in _stream_blocks(system, start, rng, x0, _STREAM_CHUNK):
        yield from block


def simulate(system, n_samples, start="zero", rng=None, x0=None):
    """Materialize the first n_samples entries of var_stream as an (n, d) array."""
    if rng is None:
        raise ValueError("simulate requires an rng (np.random.Generator)")
    if n_samples < 0:
        raise ValueError(f"n_samples must be >= 0, got {n_samples}")
    out = np.empty((n_samples, system.dim))
    filled = 0
    # Never generate more noise rows than the request needs: the values drawn
    # are a prefix of the full-chunk stream either way, but short requests
    # would otherwise pay for a whole 8192-row block.
    chunk = min(_STREAM_CHUNK, max(n_samples - 1, 1))
    for block in _stream_blocks(system, start, rng, x0, chunk):
        take = min(block.shape[0], n_samples - filled)
        out[filled : filled + take] = block[:take]
        filled += take
        if filled == n_samples:
            break
    return out


def estimate_norm_bound(prefix, squared=True):
    """Data-calibrated sample-norm budget from a stream prefix.

    Sums ||x||^2 over the prefix (or plain norms with squared=False, matching
    the looser reading of the recipe). The guard in the buffered estimators
    compares squared sample norms against this value.
    """
    prefix = np.asarray(prefix, dtype=np.float64)
    if prefix.ndim == 1:
        prefix = prefix.reshape(1, -1)
    if prefix.ndim != 2 or prefix.shape[0] < 1:
        raise DimensionError("prefix must contain at least one sample vector")
    if not np.all(np.isfinite(prefix)):
        raise ValueError("prefix has non-finite entries")
    total = 0.0
    for row in prefix:
        sq = float(row @ row)
        total += sq if squared else math.sqrt(sq)
    if total == 0.0:
        raise DegenerateNormBound("every sample in the calibration prefix is zero")
    return total


@dataclass(frozen=True)
class HyperParams:
    """Settings shared by the buffered estimators.

    horizon       total number of stream transitions budgeted (T)
    buffer_size   updates performed per buffer (B)
    gap           leading samples per buffer never used as covariates (u)
    step_size     SGD step size
    norm_bound    guard threshold on squared sample norms (R)
    burn_in       buffers excluded from the tail average (a)
    gap_exponent  exponent alpha that sized the gap (echoed into manifests)
    """

    horizon: int
    buffer_size: int
    gap: int
    step_size: float
    norm_bound: float
    burn_in: int
    gap_exponent: float = 22.0

    @property
    def stride(self) -> int:
        """Samples consumed per buffer (buffer_size + gap)."""
        return self.buffer_size + self.gap

    @property
    def n_buffers(self) -> int:
        """Full buffers available in the horizon."""
        return self.horizon // self.stride

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        if self.buffer_size < 1:
            raise ConfigError(f"buffer_size must be >= 1, got {self.buffer_size}")
        if self.gap < 0:
            raise ConfigError(f"gap must be >= 0, got {self.gap}")
        if not (self.step_size > 0 and math.isfinite(self.step_size)):
            raise ConfigError(f"step_size must be positive, got {self.step_size}")
        if not (self.norm_bound > 0 and math.isfinite(self.norm_bound)):
            raise ConfigError(f"norm_bound must be positive, got {self.norm_bound}")
        if self.n_buffers < 1:
            raise ConfigError(
                f"horizon {self.horizon} holds no full buffer of stride {self.stride}"
            )
        if not 0 <= self.burn_in < self.n_buffers:
            raise ConfigError(
                f"burn_in must lie in [0, {self.n_buffers}), got {self.burn_in}"
            )
        if self.step_size * self.norm_bound > 0.5 * (1 + 1e-12):
            raise ConfigError(
                "step_size * norm_bound must not exceed 1/2, got "
                f"{self.step_size * self.norm_bound:.6g}"
            )


def pick_hyperparams(
    horizon,
    dim,
    spectral_bound=None,
    noise_trace=None,
    alpha=22.0,
    preset="theory",
    *,
    norm_bound=None,
    bound_constant=1.0,
):
    """Build HyperParams from one of the two presets.

    theory      needs spectral_bound (an upper bound on ||A|| strictly below
                one) and noise_trace = tr(Sigma); alpha >= 22 sizes the gap.
    experiment  needs norm_bound (the data-calibrated R); uses B=100, u=10,
                step size 1/(2R), burn-in floor(ln horizon).
    """
    if dim < 1:
        raise DimensionError(f"dim must be >= 1, got {dim}")
    if horizon < 2:
        raise ConfigError(f"horizon must be >= 2, got {horizon}")
    if preset == "theory":
        if spectral_bound is None or noise_trace is None:
            raise ConfigError("theory preset needs spectral_bound and noise_trace")
        if not 0 < spectral_bound < 1:
            raise StabilityError(
                f"theory preset requires spectral_bound in (0, 1), got {spectral_bound}; "
                "for spectral radius < 1 <= spectral norm, size the gap with gelfand_gap"
            )
        if noise_trace <= 0:
            raise ConfigError(f"noise_trace must be positive, got {noise_trace}")
        if alpha < 22:
            raise ConfigError(f"theory preset requires alpha >= 22, got {alpha}")
        log_t = math.log(horizon)
        gap = math.ceil(alpha * log_t / math.log(1.0 / spectral_bound))
        buffer_size = 10 * gap
        bound = bound_constant * noise_trace * log_t / (1.0 - spectral_bound**2)
        step = 1.0 / (8.0 * bound * buffer_size)
        n_buffers = horizon // (buffer_size + gap)
        if n_buffers < 1:
            raise ConfigError(
                f"horizon {horizon} holds no full buffer of stride {buffer_size + gap}; "
                "increase the horizon or relax alpha"
            )
        return HyperParams(
            horizon=horizon,
            buffer_size=buffer_size,
            gap=gap,
            step_size=step,
            norm_bound=bound,
            burn_in=n_buffers // 2,
            gap_exponent=float(alpha),
        )
    if preset == "experiment":
        if norm_bound is None:
            raise ConfigError("experiment preset needs the calibrated norm_bound")
        if norm_bound <= 0:
            raise ConfigError(f"norm_bound must be positive, got {norm_bound}")
        return HyperParams(
            horizon=horizon,
            buffer_size=100,
            gap=10,
            step_size=1.0 / (2.0 * norm_bound),
            norm_bound=float(norm_bound),
            burn_in=math.floor(math.log(horizon)),
            gap_exponent=float(alpha),
        )
    raise ConfigError(f"unknown preset {preset!r}; expected 'theory' or 'experiment'")


def gelfand_gap(transition, horizon, g_max):
    """Buffer gap for systems with spectral radius < 1 but spectral norm >= 1.

    Evaluates ceil((ln(horizon * g_max) + d ln(d ||A||)) / ln(1/rho)) with the
    spectral radius rho estimated by repeated squaring, flooring at the plain
    stable-case value when ||A|| < 1. A certified-nilpotent transition (the
    squaring chain hits the exact zero matrix) degenerates the formula, and
    the dimension-scaled worst case ceil(d ln horizon) is returned instead.
    """
    transition = np.asarray(transition, dtype=np.float64)
    if horizon < 2:
        raise ConfigError(f"horizon must be >= 2, got {horizon}")
    if g_max <= 0:
        raise ConfigError(f"g_max must be positive, got {g_max}")
    d = transition.shape[0]
    radius = linalg.spectral_radius(transition)
    if radius >= 1.0:
        raise StabilityError(
            f"spectral radius estimate {radius:.6g} >= 1; no finite gap restores mixing"
        )
    norm = linalg.spectral_norm(transition)
    if radius == 0.0:
        gap = math.ceil(d * math.log(horizon))
    else:
        numerator = math.log(horizon * g_max) + d * math.log(d * norm)
        gap = math.ceil(numerator / math.log(1.0 / radius))
    if norm < 1.0:
        gap = max(gap, math.ceil(math.log(horizon) / math.log(1.0 / norm)))
    return max(gap, 1)
