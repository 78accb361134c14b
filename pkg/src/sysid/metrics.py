"""Error metrics for estimates of the transition matrix, and cross-seed summaries.

Two losses are tracked per snapshot:

* ``param_error``: operator-norm distance ||A_hat - A||.
* ``pred_excess``: the excess one-step prediction risk. For a stationary
  covariance G it collapses to the quadratic form tr((A_hat-A) G (A_hat-A)^T),
  which is what this module evaluates; tests cross-check the identity against
  direct Monte-Carlo prediction error.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import ConfigError, ConvergenceError, DimensionError


@dataclass(frozen=True)
class ErrorRecord:
    """One evaluation point of one run."""

    buffer_index: int
    samples_seen: int
    param_err: float
    pred_excess: float
    burn_in: bool

    def __post_init__(self):
        if self.param_err < 0 or not math.isfinite(self.param_err):
            raise ValueError(f"param_err must be finite and >= 0, got {self.param_err}")
        if self.pred_excess < -1e-10 or not math.isfinite(self.pred_excess):
            raise ValueError(
                f"pred_excess must be finite and >= -1e-10, got {self.pred_excess}"
            )


@dataclass(frozen=True)
class ErrorCurve:
    """All evaluation points of a single (estimator, seed) run, in stream order."""

    estimator: str
    seed: int
    records: tuple

    def final(self) -> ErrorRecord:
        if not self.records:
            raise ValueError("curve has no records")
        return self.records[-1]


def _check_pair(a_hat, a_star):
    a_hat = np.asarray(a_hat, dtype=np.float64)
    a_star = np.asarray(a_star, dtype=np.float64)
    if a_hat.shape != a_star.shape or a_hat.ndim != 2:
        raise DimensionError(
            f"estimate shape {a_hat.shape} does not match truth shape {a_star.shape}"
        )
    return a_hat, a_star


def param_error(a_hat, a_star):
    """Operator-norm error ||a_hat - a_star||.

    Uses the package's power-iteration spectral norm. If the iteration stalls
    short of tolerance (near-tied singular values), the best iterate is close
    enough for curve evaluation and is returned rather than aborting a run.
    """
    a_hat, a_star = _check_pair(a_hat, a_star)
    try:
        return linalg.spectral_norm(a_hat - a_star)
    except ConvergenceError as exc:
        return exc.best


def pred_excess(a_hat, a_star, g):
    """Excess prediction risk tr((a_hat-a_star) g (a_hat-a_star)^T).

    ``g`` must be the symmetric PSD stationary covariance of the covariates;
    the value is then the expected squared prediction gap on a stationary
    sample, nonnegative up to roundoff.
    """
    a_hat, a_star = _check_pair(a_hat, a_star)
    g = np.asarray(g, dtype=np.float64)
    if g.shape != a_hat.shape:
        raise DimensionError(f"g shape {g.shape} does not match {a_hat.shape}")
    delta = a_hat - a_star
    return float(np.einsum("ij,jk,ik->", delta, g, delta))


class SnapshotEvaluator:
    """Binds the ground truth (a_star, g) so runs can score snapshots cheaply."""

    def __init__(self, a_star, g):
        self.a_star = np.asarray(a_star, dtype=np.float64)
        self.g = np.asarray(g, dtype=np.float64)
        if self.a_star.shape != self.g.shape or self.a_star.ndim != 2:
            raise DimensionError("a_star and g must be square matrices of equal shape")

    def __call__(self, a_hat):
        return param_error(a_hat, self.a_star), pred_excess(a_hat, self.a_star, self.g)


@dataclass(frozen=True)
class SummaryRow:
    """Final-record statistics for one estimator across seeds."""

    estimator: str
    n_seeds: int
    param_err_mean: float
    param_err_std: float
    pred_excess_mean: float
    pred_excess_std: float
    param_err_vs_ols: float | None
    pred_excess_vs_ols: float | None


def _mean(values):
    total = 0.0
    for v in values:
        total += v
    return total / len(values)


def _std(values, mean):
    total = 0.0
    for v in values:
        total += (v - mean) ** 2
    return math.sqrt(total / len(values))


def summarize(curves):
    """Aggregate final records per estimator; rows sorted by estimator name.

    Every curve must be non-empty and all curves must end on the same buffer
    index (the shared comparison grid); no curves at all yield an empty
    summary. Ratio columns divide each estimator's mean by the 'ols' mean
    when an 'ols' group is present.
    """
    if not curves:
        return []
    finals = {}
    for curve in curves:
        record = curve.final()
        finals.setdefault(curve.estimator, []).append((curve.seed, record))
    end_indices = {rec.buffer_index for group in finals.values() for _, rec in group}
    if len(end_indices) > 1:
        raise ConfigError(
            f"curves do not share a buffer grid; final indices {sorted(end_indices)}"
        )
    stats = {}
    for name in sorted(finals):
        group = sorted(finals[name])
        p_vals = [rec.param_err for _, rec in group]
        e_vals = [rec.pred_excess for _, rec in group]
        p_mean = _mean(p_vals)
        e_mean = _mean(e_vals)
        stats[name] = (
            len(group),
            p_mean,
            _std(p_vals, p_mean),
            e_mean,
            _std(e_vals, e_mean),
        )
    ols = stats.get("ols")
    rows = []
    for name in sorted(stats):
        n, p_mean, p_std, e_mean, e_std = stats[name]
        p_ratio = e_ratio = None
        if ols is not None:
            p_ratio = p_mean / ols[1] if ols[1] != 0 else math.inf
            e_ratio = e_mean / ols[3] if ols[3] != 0 else math.inf
        rows.append(
            SummaryRow(
                estimator=name,
                n_seeds=n,
                param_err_mean=p_mean,
                param_err_std=p_std,
                pred_excess_mean=e_mean,
                pred_excess_std=e_std,
                param_err_vs_ols=p_ratio,
                pred_excess_vs_ols=e_ratio,
            )
        )
    return rows
