"""Streaming estimators of a linear state-transition matrix.

All estimators consume the same buffered stream (see ``replay``) so their
error curves land on one evaluation grid:

* ``ReplaySgd``: per buffer, runs SGD over the buffer's transitions in a
  caller-chosen order. The reverse order is the headline algorithm: replaying
  a buffer newest-first makes every update's noise independent of the
  covariate it multiplies, removing the correlation bias that plain streaming
  SGD picks up. End-of-buffer iterates beyond a burn-in are tail-averaged.
  A guard poisons the run (all-zero snapshots from then on) if any in-buffer
  sample exceeds the squared-norm bound.
* ``SparseReplaySgd``: same loop, but each row of the iterate only ever
  updates inside a known support set, so off-support entries stay exactly 0.
* ``StreamSgd``: plain SGD over every transition in stream order (biased
  baseline, last iterate).
* ``OnlineLeastSquares``: ridge-regularized recursive least squares via
  Sherman-Morrison rank-one inverse updates.

``run_estimator`` drives any of these over a sample source and returns the
scored error curve.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels, metrics, replay
from .errors import ConfigError, DimensionError

ESTIMATOR_KINDS = ("sgd_rer", "sgd", "sgd_er", "ols", "sparse_rer")

# Kinds that share the buffered replay machinery (guard + tail average).
REPLAY_KINDS = ("sgd_rer", "sgd_er", "sparse_rer")


def sgd_step(a, x, y, step):
    """One least-squares SGD update: a - 2*step*(a x - y) x^T (pure)."""
    a = np.asarray(a, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"iterate must be square, got {a.shape}")
    if x.shape != (a.shape[1],) or y.shape != (a.shape[0],):
        raise DimensionError(
            f"vectors of shape {x.shape}/{y.shape} do not fit iterate {a.shape}"
        )
    return a - 2.0 * step * np.outer(a @ x - y, x)


@dataclass(frozen=True)
class SupportPattern:
    """Per-row support sets for the sparse estimator, CSR-encoded.

    indices[offsets[l]:offsets[l+1]] are the sorted column indices row l may
    touch. Every row's set must be non-empty.
    """

    dim: int
    indices: np.ndarray
    offsets: np.ndarray

    @classmethod
    def from_sets(cls, sets, dim):
        if len(sets) != dim:
            raise DimensionError(f"need {dim} support sets, got {len(sets)}")
        indices = []
        offsets = [0]
        for l, s in enumerate(sets):
            cols = sorted(set(int(c) for c in s))
            if not cols:
                raise ConfigError(f"support set for row {l} is empty")
            if cols[0] < 0 or cols[-1] >= dim:
                raise ConfigError(f"support set for row {l} has out-of-range columns")
            indices.extend(cols)
            offsets.append(len(indices))
        return cls(
            dim=dim,
            indices=np.asarray(indices, dtype=np.int64),
            offsets=np.asarray(offsets, dtype=np.int64),
        )

    @classmethod
    def from_matrix(cls, m):
        """Support of a matrix's nonzero pattern; the diagonal is always kept
        so no row is empty."""
        m = np.asarray(m)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"support source must be square, got {m.shape}")
        d = m.shape[0]
        return cls.from_sets(
            [set(np.nonzero(m[l])[0].tolist()) | {l} for l in range(d)], d
        )

    def row(self, l):
        return self.indices[self.offsets[l] : self.offsets[l + 1]]

    @property
    def max_row_size(self) -> int:
        return int(np.max(np.diff(self.offsets)))

    def mask(self):
        out = np.zeros((self.dim, self.dim), dtype=bool)
        for l in range(self.dim):
            out[l, self.row(l)] = True
        return out


def sparse_norm_bound(g_top, max_support, horizon, constant=1.0):
    """Default squared-norm guard level for the sparse estimator.

    Scales with the largest per-row support size instead of the full
    dimension: constant * max_support * g_top * ln(horizon), where g_top is
    the top eigenvalue of the stationary covariance.
    """
    if g_top <= 0 or max_support < 1 or horizon < 2:
        raise ConfigError("need g_top > 0, max_support >= 1, horizon >= 2")
    return constant * max_support * g_top * float(np.log(horizon))


class ReplaySgd:
    """Buffered SGD with guard and tail averaging (order set by the schedule)."""

    def __init__(self, dim, hp, a0=None):
        self.hp = hp
        self.dim = dim
        if a0 is None:
            self.current = np.zeros((dim, dim))
        else:
            a0 = np.asarray(a0, dtype=np.float64)
            if a0.shape != (dim, dim):
                raise DimensionError(f"a0 must be ({dim},{dim}), got {a0.shape}")
            self.current = a0.copy()
        self.tail_sum = np.zeros((dim, dim))
        self.buffers_done = 0
        self.poisoned = False

    def _guard_trips(self, buf):
        in_buffer = buf.samples[: self.hp.stride]
        return float(np.einsum("ij,ij->i", in_buffer, in_buffer).max()) > self.hp.norm_bound

    def _apply(self, buf, cov_idx, tgt_idx):
        _kernels.apply_schedule(
            self.current, buf.samples, cov_idx, tgt_idx, self.hp.step_size
        )

    def process_buffer(self, buf, pairs):
        """Consume one BufferView using the given (covariate, target) pairs.

        A guard trip poisons the state permanently; a poisoned state keeps
        counting buffers (stream position) but never updates the estimate.
        """
        if buf.samples.shape != (self.hp.stride + 1, self.dim):
            raise DimensionError(
                f"buffer shape {buf.samples.shape} does not fit stride "
                f"{self.hp.stride} and dim {self.dim}"
            )
        if not self.poisoned:
            if self._guard_trips(buf):
                self.poisoned = True
            else:
                pairs = np.asarray(pairs, dtype=np.int64)
                self._apply(
                    buf,
                    np.ascontiguousarray(pairs[:, 0]),
                    np.ascontiguousarray(pairs[:, 1]),
                )
                if self.buffers_done >= self.hp.burn_in:
                    self.tail_sum += self.current
        self.buffers_done += 1

    def snapshot(self):
        """Current estimate: tail average past burn-in, last iterate before,
        the zero matrix once poisoned."""
        if self.poisoned:
            return np.zeros((self.dim, self.dim))
        if self.buffers_done <= self.hp.burn_in:
            return self.current.copy()
        return self.tail_sum / (self.buffers_done - self.hp.burn_in)

    @property
    def in_burn_in(self) -> bool:
        return self.buffers_done <= self.hp.burn_in


class SparseReplaySgd(ReplaySgd):
    """ReplaySgd with row-masked updates confined to a known support pattern.

    The guard compares the per-row masked norms max_l ||x[S_l]||^2 against the
    bound; that is the quantity the sparse analysis controls, and it reduces
    to the dense guard when every row has full support.
    """

    def __init__(self, dim, hp, support, a0=None):
        super().__init__(dim, hp, a0=a0)
        if support.dim != dim:
            raise DimensionError(f"support dim {support.dim} != estimator dim {dim}")
        self.support = support
        if a0 is not None:
            off = self.current[~support.mask()]
            if np.any(off != 0):
                raise ConfigError("a0 has nonzero entries outside the support")

    def _guard_trips(self, buf):
        worst = _kernels.masked_max_sq_norm(
            buf.samples, self.hp.stride, self.support.indices, self.support.offsets
        )
        return worst > self.hp.norm_bound

    def _apply(self, buf, cov_idx, tgt_idx):
        _kernels.sparse_apply_schedule(
            self.current,
            buf.samples,
            cov_idx,
            tgt_idx,
            self.hp.step_size,
            self.support.indices,
            self.support.offsets,
        )


class StreamSgd:
    """Plain SGD over every transition in stream order; estimate = last iterate."""

    def __init__(self, dim, step, a0=None):
        self.dim = dim
        self.step = step
        self.current = np.zeros((dim, dim)) if a0 is None else np.array(a0, dtype=np.float64)
        if self.current.shape != (dim, dim):
            raise DimensionError(f"a0 must be ({dim},{dim})")

    def process_span(self, samples):
        """Apply the transitions (samples[j] -> samples[j+1]) for all j."""
        samples = np.ascontiguousarray(samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[1] != self.dim:
            raise DimensionError(f"span shape {samples.shape} does not fit dim {self.dim}")
        _kernels.sgd_span(self.current, samples, self.step)

    def snapshot(self):
        return self.current.copy()


class OnlineLeastSquares:
    """Recursive ridge least squares over streamed transitions.

    Maintains inv_cov = (ridge I + sum x x^T)^{-1} by Sherman-Morrison (with a
    refinement step guarding against the tiny-ridge cancellation, see the
    kernel) and cross = sum y x^T; the estimate is cross @ inv_cov.
    """

    def __init__(self, dim, ridge):
        if not ridge > 0:
            raise ConfigError(f"ridge must be positive, got {ridge}")
        self.dim = dim
        self.ridge = float(ridge)
        self.inv_cov = np.eye(dim) / ridge
        self.cov = np.eye(dim) * ridge
        self.cross = np.zeros((dim, dim))
        self.n_transitions = 0

    def process_span(self, samples):
        """Apply the transitions (samples[j] -> samples[j+1]) for all j."""
        samples = np.ascontiguousarray(samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[1] != self.dim:
            raise DimensionError(f"span shape {samples.shape} does not fit dim {self.dim}")
        _kernels.ols_span(self.inv_cov, self.cross, self.cov, samples)
        self.n_transitions += max(samples.shape[0] - 1, 0)

    def update(self, x, y):
        """Single-transition update (x is the covariate, y the response)."""
        self.process_span(np.stack([np.asarray(x, dtype=np.float64),
                                    np.asarray(y, dtype=np.float64)]))

    def estimate(self):
        return self.cross @ self.inv_cov

    def snapshot(self):
        return self.estimate()


# Scale factor tying the default ridge to the data: ridge = RIDGE_SCALE *
# tr(first-buffer covariance) / dim, small enough to be negligible next to
# any usable covariate mass yet nonzero for invertibility.
RIDGE_SCALE = 1e-8


def _default_ridge(first_window, dim):
    mass = float(np.einsum("ij,ij->", first_window, first_window))
    if mass == 0.0:
        return RIDGE_SCALE
    return RIDGE_SCALE * mass / dim


def run_estimator(
    kind,
    source,
    system,
    hp,
    *,
    evaluator,
    seed=0,
    rng=None,
    a0=None,
    support=None,
    index_offset=0,
    skip_records=0,
):
    """Drive one estimator over a sample source and score every buffer end.

    The source is cut into stride-sized buffers; buffered kinds process each
    buffer through their schedule, while 'sgd' and 'ols' process the same
    samples as plain consecutive transitions. After each buffer the snapshot
    is scored by ``evaluator(a_hat) -> (param_err, pred_excess)``.

    index_offset shifts the reported buffer_index (used when the caller has
    already consumed leading buffers of the stream); skip_records suppresses
    the first evaluations while still consuming their data (used to keep the
    record grid aligned across estimators that start at different offsets).
    Returns an ErrorCurve; a source shorter than one buffer yields an empty
    curve.
    """
    if kind not in ESTIMATOR_KINDS:
        raise ConfigError(f"unknown estimator kind {kind!r}; expected {ESTIMATOR_KINDS}")
    dim = system.dim
    if kind == "sparse_rer":
        if support is None:
            raise ConfigError("sparse_rer needs a SupportPattern")
        state = SparseReplaySgd(dim, hp, support, a0=a0)
    elif kind in REPLAY_KINDS:
        state = ReplaySgd(dim, hp, a0=a0)
    elif kind == "sgd":
        state = StreamSgd(dim, hp.step_size, a0=a0)
    else:
        state = None  # ols: built lazily, ridge calibrated on the first buffer
    if kind == "sgd_er" and rng is None:
        raise ConfigError("sgd_er needs an rng for its per-buffer permutations")
    fixed_pairs = None
    if kind in ("sgd_rer", "sparse_rer"):
        fixed_pairs = replay.make_schedule("reverse", hp.buffer_size, hp.gap)

    records = []
    for buf in replay.iter_buffers(source, hp.stride):
        if kind in REPLAY_KINDS:
            pairs = (
                fixed_pairs
                if fixed_pairs is not None
                else replay.make_schedule("random", hp.buffer_size, hp.gap, rng)
            )
            state.process_buffer(buf, pairs)
            burn = state.in_burn_in
        else:
            if state is None:
                state = OnlineLeastSquares(dim, _default_ridge(buf.samples[: hp.stride], dim))
            state.process_span(buf.samples)
            burn = False
        if buf.index < skip_records:
            continue
        buffer_index = index_offset + buf.index
        p_err, p_exc = evaluator(state.snapshot())
        records.append(
            metrics.ErrorRecord(
                buffer_index=buffer_index,
                samples_seen=(buffer_index + 1) * hp.stride,
                param_err=p_err,
                pred_excess=p_exc,
                burn_in=burn,
            )
        )
    return metrics.ErrorCurve(estimator=kind, seed=seed, records=tuple(records))
