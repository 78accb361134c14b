"""Dense linear-algebra primitives used throughout the package.

The two iterative routines are deliberately hand-rolled and deterministic:

* ``spectral_norm`` runs power iteration on M^T M from a fixed start vector
  with a residual-based stopping rule, so repeated calls on the same matrix
  return bit-identical values.
* ``solve_lyapunov`` runs the fixed-point iteration G <- A G A^T + S, which
  converges geometrically at rate ||A||^2 for stable A.

Factorization and sampling lean on numpy (``np.linalg.cholesky``, the PCG64
``Generator``); tests check those against multiply-back and law-of-large-
numbers oracles.
"""

import numpy as np

from . import _kernels
from .errors import ConvergenceError, DefinitenessError, DimensionError, StabilityError

# Shared default: iterative routines stop at absolute-plus-relative 1e-10.
DEFAULT_TOL = 1e-10


def _require_matrix(m, name):
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be a 2-d array, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def _require_square(m, name):
    m = _require_matrix(m, name)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    return m


def _require_symmetric(m, name):
    m = _require_square(m, name)
    scale = max(float(np.abs(m).max()), 1.0)
    if float(np.abs(m - m.T).max()) > 1e-12 * scale:
        raise ValueError(f"{name} must be symmetric")
    return m


def spectral_norm(m, tol=DEFAULT_TOL, max_iter=10_000):
    """Largest singular value of a (possibly rectangular) matrix.

    Power iteration on the Gram matrix M^T M, started from the normalized
    all-ones vector, stopped when the eigen-residual drops below
    tol + tol*estimate. Raises ConvergenceError (carrying the best estimate
    in ``.best``) if the cap is hit first.
    """
    m = _require_matrix(m, "m")
    gram = m.T @ m
    lam, res, _iters, ok = _kernels.top_eig_psd(gram, tol, tol, max_iter)
    value = float(np.sqrt(max(lam, 0.0)))
    if not ok:
        raise ConvergenceError(
            f"power iteration did not reach tol={tol} in {max_iter} iterations "
            f"(residual {res:.3e})",
            best=value,
        )
    return value


def spectral_radius(m, max_squarings=60):
    """Largest eigenvalue modulus, via norm growth under repeated squaring.

    Tracks ||M^(2^j)||_F^(1/2^j), which converges to the spectral radius and
    sidesteps the failure modes of vector iteration (complex dominant pairs,
    start vectors in an invariant subspace). A chain that hits the exact zero
    matrix certifies nilpotency, and 0.0 is returned.
    """
    m = _require_square(m, "m")
    if m.shape[0] == 0:
        return 0.0
    norm = float(np.linalg.norm(m))
    if norm == 0.0:
        return 0.0
    log_power_norm = np.log(norm)  # log ||M^(2^j)||_F for the current j
    unit = m / norm
    estimate = norm
    for j in range(1, max_squarings + 1):
        squared = unit @ unit
        norm = float(np.linalg.norm(squared))
        if norm == 0.0:
            return 0.0
        log_power_norm = np.log(norm) + 2.0 * log_power_norm
        previous = estimate
        estimate = float(np.exp(log_power_norm / 2.0**j))
        unit = squared / norm
        if abs(estimate - previous) <= 1e-13 * max(estimate, 1e-300):
            break
    return estimate


def solve_lyapunov(a, sigma, tol=DEFAULT_TOL, max_iter=1_000_000):
    """Steady-state covariance G solving G = A G A^T + sigma.

    Fixed-point iteration from G = sigma; each step adds one more term of the
    series sum_s A^s sigma (A^T)^s. The returned iterate satisfies the purely
    relative bound ||A G A^T + sigma - G||_F <= tol * ||G||_F. Divergence
    (iterates blowing up, or no convergence within max_iter; both symptoms
    of spectral radius >= 1) raises StabilityError.
    """
    a = _require_square(a, "a")
    sigma = _require_symmetric(sigma, "sigma")
    if a.shape != sigma.shape:
        raise DimensionError(f"shape mismatch: a {a.shape} vs sigma {sigma.shape}")
    g = sigma.copy()
    for _ in range(max_iter):
        g_next = a @ g @ a.T + sigma
        g_next = 0.5 * (g_next + g_next.T)
        # ||g_next - g|| is exactly the fixed-point residual of g itself.
        residual = float(np.linalg.norm(g_next - g))
        if residual <= tol * float(np.linalg.norm(g)):
            return g
        g = g_next
        g_norm = float(np.linalg.norm(g))
        if not np.isfinite(g_norm) or g_norm > 1e100:
            raise StabilityError(
                "Lyapunov iteration diverged; the transition matrix is not stable"
            )
    raise StabilityError(
        f"Lyapunov iteration did not converge in {max_iter} steps; "
        "the transition matrix is at or beyond the stability boundary"
    )


def cholesky(s):
    """Lower-triangular L with L L^T = s; DefinitenessError if s is not PD."""
    s = _require_symmetric(s, "s")
    try:
        return np.linalg.cholesky(s)
    except np.linalg.LinAlgError as exc:
        raise DefinitenessError(f"matrix is not positive definite: {exc}") from exc


def gaussian_vector(rng, chol):
    """One draw from N(0, chol chol^T) using d fresh standard normals."""
    chol = _require_square(chol, "chol")
    return chol @ rng.standard_normal(chol.shape[0])
