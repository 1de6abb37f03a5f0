"""Pure-numpy fallbacks for histogram building and forest prediction."""

import numpy as np


def build_histograms(binned, idx, grad, n_bins):
    """Per-feature bin counts and residual sums over the rows in idx."""
    n_feat = binned.shape[1]
    cnt = np.empty((n_feat, n_bins), np.int64)
    sm = np.empty((n_feat, n_bins), np.float64)
    sub = binned[idx]
    g = grad[idx]
    for f in range(n_feat):
        col = sub[:, f]
        cnt[f] = np.bincount(col, minlength=n_bins)
        sm[f] = np.bincount(col, weights=g, minlength=n_bins)
    return cnt, sm


def predict_forest(x, feat, thr, left, right, val, offsets, base, out):
    """Level-synchronous descent of all rows through each packed tree."""
    n = x.shape[0]
    out[:] = base
    rows = np.arange(n)
    for t in range(offsets.size - 1):
        node = np.full(n, offsets[t], np.int64)
        while True:
            f = feat[node]
            active = f >= 0
            if not active.any():
                break
            an = node[active]
            go_left = x[rows[active], f[active]] <= thr[an]
            node[active] = np.where(go_left, left[an], right[an])
        out += val[node]
    return out


def warmup() -> None:
    """No compilation needed; present for backend API parity."""
