"""Pure-numpy implementations of the hot loops.

Each function has a twin in ``_ckernels.pyx`` with the same signature.
Summation order in ``build_histogram`` matches the compiled loop exactly,
so both backends grow bit-identical trees.
"""
import numpy as np

_THETA_CHUNK = 512


def build_histogram(binned, grad, rows, n_bins):
    """Per-feature gradient sums and counts over ``n_bins`` bins for ``rows``."""
    p = binned.shape[1]
    sub = binned[rows].astype(np.intp)
    sub += np.arange(p, dtype=np.intp) * n_bins
    flat = sub.ravel()
    weights = np.repeat(grad[rows], p)
    size = p * n_bins
    gsum = np.bincount(flat, weights=weights, minlength=size).reshape(p, n_bins)
    count = np.bincount(flat, minlength=size).reshape(p, n_bins).astype(np.int64)
    return gsum, count


def apply_tree(X, feature, threshold, left, right, value):
    """Route every row of ``X`` to a leaf and return the leaf values."""
    n = X.shape[0]
    node = np.zeros(n, dtype=np.intp)
    rows = np.arange(n)
    while True:
        f = feature[node]
        internal = f >= 0
        if not internal.any():
            break
        r = rows[internal]
        nd = node[internal]
        go_left = X[r, f[internal]] <= threshold[nd]
        node[internal] = np.where(go_left, left[nd], right[nd])
    return value[node].astype(np.float64)


def local_theta(xq, x, y_res, t_res, bandwidth):
    """Gaussian-kernel weighted residual-on-residual slope at each query point."""
    yt = y_res * t_res
    tt = t_res * t_res
    out = np.empty(xq.shape[0])
    inv = 1.0 / bandwidth
    for start in range(0, xq.shape[0], _THETA_CHUNK):
        q = xq[start:start + _THETA_CHUNK]
        d2 = ((q[:, None] - x[None, :]) * inv) ** 2
        # shift by the nearest distance so far-away queries do not underflow
        k = np.exp(-0.5 * (d2 - d2.min(axis=1, keepdims=True)))
        out[start:start + _THETA_CHUNK] = (k @ yt) / (k @ tt)
    return out
