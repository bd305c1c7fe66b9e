"""Pure-numpy kernels (fallback when the compiled extension is absent).

Mirrors ``_splitcore.pyx`` operation for operation so both kernels produce
bit-identical results: sequential prefix sums, identical gain arithmetic,
first-maximum tie-breaking in feature-major order, and per-element
tree-by-tree accumulation in prediction.
"""

from __future__ import annotations

import numpy as np


def scan_splits(
    x_sorted: np.ndarray, r_sorted: np.ndarray, min_child: int, node_sse: float
) -> tuple[int, float]:
    """Best axis-aligned split over presorted columns.

    ``x_sorted`` and ``r_sorted`` are (m, n_features) with each column sorted
    ascending by feature value and residuals aligned to that order. A split
    after sorted position k sends positions 0..k left. Returns
    (feature * (m - 1) + k, gain), or (-1, 0.0) when no split has
    ``min_child`` rows in both children and gain above the noise floor.
    """
    m = x_sorted.shape[0]
    if m < 2 * min_child:
        return -1, 0.0
    cum = np.cumsum(r_sorted, axis=0)
    total = cum[-1, :]
    ls = cum[:-1, :]
    rs = total[None, :] - ls
    nl = np.arange(1.0, m, dtype=np.float64)
    nr = m - nl
    base = total * total / m
    gains = ls * ls / nl[:, None] + rs * rs / nr[:, None] - base[None, :]
    valid = x_sorted[:-1, :] < x_sorted[1:, :]
    valid &= ((nl >= min_child) & (nr >= min_child))[:, None]
    flat = np.where(valid, gains, -np.inf).T.ravel()
    best = int(np.argmax(flat))
    gain = float(flat[best])
    if not np.isfinite(gain) or gain <= 1e-12 * node_sse or gain <= 0.0:
        return -1, 0.0
    return best, gain


def predict_ensemble(
    x: np.ndarray,
    feature: np.ndarray,
    threshold: np.ndarray,
    left: np.ndarray,
    right: np.ndarray,
    value: np.ndarray,
    offsets: np.ndarray,
    base: float,
    learning_rate: float,
) -> np.ndarray:
    """Walk every (flattened) tree per row: base + lr * sum of leaf values."""
    n = x.shape[0]
    out = np.full(n, base)
    all_rows = np.arange(n)
    for t in range(offsets.shape[0] - 1):
        off = int(offsets[t])
        idx = np.full(n, off, dtype=np.int64)
        while True:
            feat = feature[idx]
            internal = feat >= 0
            if not internal.any():
                break
            rows = all_rows[internal]
            sub = idx[internal]
            go_left = x[rows, feat[internal]] <= threshold[sub]
            idx[internal] = off + np.where(go_left, left[sub], right[sub])
        out = out + learning_rate * value[idx]
    return out
