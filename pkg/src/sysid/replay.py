"""Buffer discipline for the streaming replay estimators.

A stream is cut into back-to-back buffers of ``stride`` samples. Each buffer
is exposed together with one look-ahead sample (the first sample of the next
buffer), because the newest transition inside a buffer needs it as its
regression target. Every sample is pulled from the source exactly once; the
look-ahead is carried over rather than re-read.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

SCHEDULE_POLICIES = ("reverse", "forward", "random")


@dataclass(frozen=True)
class BufferView:
    """Window ``index`` over a stream: samples X_{i*stride} .. X_{i*stride+stride}.

    ``samples`` has stride+1 rows; the last row is the look-ahead sample shared
    with the following buffer.
    """

    index: int
    samples: np.ndarray

    @property
    def stride(self) -> int:
        return self.samples.shape[0] - 1


def n_full_buffers(n_samples, stride):
    """How many complete stride+1 windows a stream of n_samples supports."""
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    return max((n_samples - 1) // stride, 0)


def iter_buffers(source, stride):
    """Yield BufferViews over a sample source until it runs dry.

    ``source`` is either a materialized (n, d) array (windows are zero-copy
    views) or any iterable of d-vectors (windows are stacked copies; each
    sample is read once). A final partial window is dropped.
    """
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    if isinstance(source, np.ndarray):
        for index in range(n_full_buffers(source.shape[0], stride)):
            lo = index * stride
            yield BufferView(index=index, samples=source[lo : lo + stride + 1])
        return
    it = iter(source)
    carry = None
    index = 0
    while True:
        window = [] if carry is None else [carry]
        while len(window) < stride + 1:
            try:
                window.append(np.asarray(next(it), dtype=np.float64))
            except StopIteration:
                return
        samples = np.stack(window)
        yield BufferView(index=index, samples=samples)
        carry = samples[-1]
        index += 1


def make_schedule(policy, buffer_size, gap, rng=None):
    """Order in which a buffer's transitions are replayed.

    Returns an int64 array of shape (buffer_size, 2): each row is a
    (covariate, target) index pair into a BufferView's samples, with target =
    covariate + 1 always, and covariates confined to the last buffer_size
    positions of the window (the first ``gap`` samples only ever shield the
    buffer from the previous one).

    reverse   newest transition first (the unbiased replay order)
    forward   oldest transition first (stream order; biased control)
    random    a fresh uniform permutation of the same pairs (needs rng)
    """
    if buffer_size < 1:
        raise ConfigError(f"buffer_size must be >= 1, got {buffer_size}")
    if gap < 0:
        raise ConfigError(f"gap must be >= 0, got {gap}")
    stride = buffer_size + gap
    cov = np.arange(stride - 1, gap - 1, -1, dtype=np.int64)
    pairs = np.stack([cov, cov + 1], axis=1)
    if policy == "reverse":
        return pairs
    if policy == "forward":
        return pairs[::-1].copy()
    if policy == "random":
        if rng is None:
            raise ConfigError("random schedule policy needs an rng")
        return pairs[rng.permutation(buffer_size)]
    raise ConfigError(
        f"unknown schedule policy {policy!r}; expected one of {SCHEDULE_POLICIES}"
    )
