"""Compiled kernels for histogram building and forest prediction."""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def build_histograms(binned, idx, grad, n_bins):
    """Per-feature bin counts and residual sums over the rows in idx.

    binned is the (rows, features) uint8 matrix of bin indices.
    """
    n_feat = binned.shape[1]
    cnt = np.zeros((n_feat, n_bins), np.int64)
    sm = np.zeros((n_feat, n_bins), np.float64)
    for t in range(idx.size):
        i = idx[t]
        g = grad[i]
        for f in range(n_feat):
            b = binned[i, f]
            cnt[f, b] += 1
            sm[f, b] += g
    return cnt, sm


@njit(cache=True, nogil=True)
def predict_forest(x, feat, thr, left, right, val, offsets, base, out):
    """Sum of leaf values across trees packed into flat node arrays.

    feat < 0 marks a leaf; left/right hold absolute node indices.
    """
    n = x.shape[0]
    n_trees = offsets.size - 1
    for i in range(n):
        acc = base
        for t in range(n_trees):
            node = offsets[t]
            while feat[node] >= 0:
                if x[i, feat[node]] <= thr[node]:
                    node = left[node]
                else:
                    node = right[node]
            acc += val[node]
        out[i] = acc
    return out


def warmup() -> None:
    """Force JIT compilation of the tree kernels."""
    binned = np.zeros((4, 2), np.uint8)
    idx = np.arange(4, dtype=np.int64)
    grad = np.ones(4)
    build_histograms(binned, idx, grad, 4)
    x = np.zeros((2, 2))
    feat = np.array([0, -1, -1], np.int32)
    thr = np.array([0.5, 0.0, 0.0])
    left = np.array([1, -1, -1], np.int32)
    right = np.array([2, -1, -1], np.int32)
    val = np.array([0.0, 1.0, 2.0])
    offsets = np.array([0, 3], np.int64)
    predict_forest(x, feat, thr, left, right, val, offsets, 0.0, np.empty(2))
