"""JIT-compiled inner loops.

Everything here is dumb and fast: plain float64 loops over small dense
matrices, compiled once per process (cache=True persists across runs).
Contracts, validation, and error handling live in the wrapping modules.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def top_eig_psd(gram, tol_abs, tol_rel, max_iter):
    """Dominant eigenvalue of a symmetric PSD matrix by power iteration.

    Starts from the normalized all-ones vector; if the iterate collapses to
    zero (start lay in the kernel) it restarts from successive basis vectors,
    which covers every PSD matrix that is not identically zero.

    Returns (eigenvalue_estimate, residual, iterations, converged) where the
    residual is ||gram v - lam v|| for the final unit iterate v.
    """
    d = gram.shape[0]
    v = np.full(d, 1.0 / np.sqrt(d))
    next_restart = 0
    lam = 0.0
    res = 0.0
    for k in range(max_iter):
        w = gram @ v
        nw = np.sqrt(w @ w)
        if nw == 0.0:
            # v is in the kernel; restart unless we have exhausted the basis,
            # in which case gram is the zero matrix and 0 is exact.
            if next_restart >= d:
                return 0.0, 0.0, k, True
            v = np.zeros(d)
            v[next_restart] = 1.0
            next_restart += 1
            continue
        v = w / nw
        gv = gram @ v
        lam = v @ gv
        r = gv - lam * v
        res = np.sqrt(r @ r)
        if res <= tol_abs + tol_rel * abs(lam):
            return lam, res, k + 1, True
    return lam, res, max_iter, False


@njit(cache=True)
def var_recursion(a, x_prev, noise, out):
    """Fill out[i] with the linear recursion x <- a @ x + noise[i]."""
    n, d = noise.shape
    x = x_prev.copy()
    for i in range(n):
        y = a @ x
        for j in range(d):
            x[j] = y[j] + noise[i, j]
            out[i, j] = x[j]


@njit(cache=True)
def apply_schedule(a, samples, cov_idx, tgt_idx, step):
    """Run rank-one regression updates over (covariate, target) index pairs.

    a <- a - 2*step*(a x - y) x^T for each pair, in the given order, in place.
    Rows are updated independently with the same row-dot primitive as the
    masked variant, so full-support masked runs agree with this bit for bit.
    """
    d = a.shape[0]
    for p in range(cov_idx.shape[0]):
        x = samples[cov_idx[p]]
        y = samples[tgt_idx[p]]
        for i in range(d):
            ri = 2.0 * step * (a[i] @ x - y[i])
            for j in range(d):
                a[i, j] -= ri * x[j]


@njit(cache=True)
def sgd_span(a, samples, step):
    """Forward-order updates over every consecutive transition in samples."""
    n, d = samples.shape
    for t in range(n - 1):
        x = samples[t]
        y = samples[t + 1]
        r = a @ x
        for i in range(d):
            ri = 2.0 * step * (r[i] - y[i])
            for j in range(d):
                a[i, j] -= ri * x[j]


@njit(cache=True)
def ols_span(inv_cov, cross, cov, samples):
    """Rank-one recursive least-squares updates over consecutive transitions.

    Maintains inv_cov = (eps I + sum x x^T)^{-1} via the Sherman-Morrison
    identity, cov = eps I + sum x x^T, and cross = sum y x^T. Each rank-one
    step is followed by one Newton-Schulz refinement P <- P(2I - cov P) and a
    symmetrization: with a tiny eps the first few Sherman-Morrison steps
    cancel against the huge eps^-1 start and would otherwise leave a
    permanent absolute error in inv_cov; the refinement is a no-op at the
    exact inverse and pulls the iterate back to it.
    """
    n, d = samples.shape
    tmp = np.empty((d, d))
    ref = np.empty((d, d))
    for t in range(n - 1):
        x = samples[t]
        y = samples[t + 1]
        iv = inv_cov @ x
        denom = 1.0 + x @ iv
        for i in range(d):
            gi = iv[i] / denom
            for j in range(d):
                inv_cov[i, j] -= gi * iv[j]
        for i in range(d):
            xi = x[i]
            yi = y[i]
            for j in range(d):
                cov[i, j] += xi * x[j]
                cross[i, j] += yi * x[j]
        for i in range(d):
            for j in range(d):
                s = 0.0
                for k in range(d):
                    s += cov[i, k] * inv_cov[k, j]
                tmp[i, j] = -s
            tmp[i, i] += 2.0
        for i in range(d):
            for j in range(d):
                s = 0.0
                for k in range(d):
                    s += inv_cov[i, k] * tmp[k, j]
                ref[i, j] = s
        for i in range(d):
            inv_cov[i, i] = ref[i, i]
            for j in range(i):
                v = 0.5 * (ref[i, j] + ref[j, i])
                inv_cov[i, j] = v
                inv_cov[j, i] = v


@njit(cache=True)
def sparse_apply_schedule(a, samples, cov_idx, tgt_idx, step, supp_indices, supp_offsets):
    """Row-masked rank-one updates: row l only ever touches its support.

    supp_indices/supp_offsets is a CSR-style encoding of the per-row support
    sets. The residual uses the full inner product a[l] @ x, which equals the
    masked one because off-support entries of a[l] stay exactly zero.
    """
    d = a.shape[0]
    for p in range(cov_idx.shape[0]):
        x = samples[cov_idx[p]]
        y = samples[tgt_idx[p]]
        for l in range(d):
            r = 2.0 * step * (a[l] @ x - y[l])
            for q in range(supp_offsets[l], supp_offsets[l + 1]):
                j = supp_indices[q]
                a[l, j] -= r * x[j]


@njit(cache=True)
def masked_max_sq_norm(samples, n_rows, supp_indices, supp_offsets):
    """Max over samples and rows l of ||x restricted to row l's support||^2."""
    d = samples.shape[1]
    best = 0.0
    for t in range(n_rows):
        x = samples[t]
        for l in range(d):
            s = 0.0
            for q in range(supp_offsets[l], supp_offsets[l + 1]):
                xj = x[supp_indices[q]]
                s += xj * xj
            if s > best:
                best = s
    return best
