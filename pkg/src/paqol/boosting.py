"""Gradient-boosted regression trees with squared-error loss.

The model starts from the target mean; each round fits one axis-aligned
regression tree to the residuals by greedy variance reduction, with splits
disallowed when either child would hold fewer than ``min_child_samples``
rows. There is no subsampling, so fitting is fully deterministic; the seed
is recorded for provenance only.

The per-node split search runs on a compiled kernel when the extension built;
otherwise a numpy fallback with bit-identical output is selected at import.
"""

from __future__ import annotations

import os
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import _splitcore_py

if os.environ.get("PAQOL_PURE_PYTHON"):
    _kernel = _splitcore_py
    _KERNEL_NAME = "python"
else:
    try:
        from . import _splitcore  # type: ignore[attr-defined]

        _kernel = _splitcore
        _KERNEL_NAME = "compiled"
    except ImportError:
        _kernel = _splitcore_py
        _KERNEL_NAME = "python"


class BoostingError(ValueError):
    """Contract violation while fitting or predicting."""


def active_kernel() -> str:
    """Which split kernel is in use: 'compiled' or 'python'."""
    return _KERNEL_NAME


@contextmanager
def force_kernel(name: str) -> Iterator[None]:
    """Temporarily pin the split kernel ('compiled' | 'python'); benchmarking
    and parity tests only."""
    global _kernel, _KERNEL_NAME
    if name == "compiled":
        from . import _splitcore as module  # raises if the extension is absent
    elif name == "python":
        module = _splitcore_py
    else:
        raise ValueError(f"unknown kernel {name!r}")
    previous = (_kernel, _KERNEL_NAME)
    _kernel, _KERNEL_NAME = module, name
    try:
        yield
    finally:
        _kernel, _KERNEL_NAME = previous


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 2
    min_child_samples: int = 60
    n_trees: int = 100
    learning_rate: float = 0.1

    def __post_init__(self) -> None:
        if self.max_depth < 1:
            raise BoostingError("max_depth must be >= 1")
        if self.min_child_samples < 1:
            raise BoostingError("min_child_samples must be >= 1")
        if self.n_trees < 1:
            raise BoostingError("n_trees must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise BoostingError("learning_rate must be in (0, 1]")


@dataclass(frozen=True, eq=False)
class Tree:
    """Array-encoded regression tree; ``feature[i] < 0`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def is_stump(self) -> bool:
        return self.n_nodes == 1


@dataclass(frozen=True, eq=False)
class FlatTrees:
    """All of a model's trees concatenated for batch prediction; child
    indices are tree-local, ``offsets[t]`` locates tree t."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    offsets: np.ndarray


def _flatten_trees(trees: tuple[Tree, ...]) -> FlatTrees:
    if not trees:
        empty_i = np.empty(0, dtype=np.int32)
        empty_f = np.empty(0, dtype=np.float64)
        return FlatTrees(empty_i, empty_f, empty_i, empty_i, empty_f, np.zeros(1, dtype=np.int64))
    offsets = np.zeros(len(trees) + 1, dtype=np.int64)
    np.cumsum([t.n_nodes for t in trees], out=offsets[1:])
    return FlatTrees(
        feature=np.ascontiguousarray(np.concatenate([t.feature for t in trees])),
        threshold=np.ascontiguousarray(np.concatenate([t.threshold for t in trees])),
        left=np.ascontiguousarray(np.concatenate([t.left for t in trees])),
        right=np.ascontiguousarray(np.concatenate([t.right for t in trees])),
        value=np.ascontiguousarray(np.concatenate([t.value for t in trees])),
        offsets=offsets,
    )


@dataclass(frozen=True, eq=False)
class BoostedTreeModel:
    base_value: float
    trees: tuple[Tree, ...]
    params: TreeParams
    n_features: int
    seed: int = 0
    flat: FlatTrees | None = None


def _best_split(xs: np.ndarray, rs: np.ndarray, r_node: np.ndarray, min_child: int):
    """Best split over a node's presorted feature block.

    ``xs``/``rs`` are (m, n_features) with each column in ascending feature
    order and residuals aligned. Returns (feature, threshold, k) where the
    left child takes sorted positions 0..k, or None.
    """
    m, n_features = xs.shape
    if n_features == 0 or m < 2 * min_child:
        return None
    node_sse = float(r_node @ r_node - float(r_node.sum()) ** 2 / m)
    flat, _gain = _kernel.scan_splits(xs, rs, min_child, node_sse)
    if flat < 0:
        return None
    f = flat // (m - 1)
    k = flat % (m - 1)
    a, b = xs[k, f], xs[k + 1, f]
    threshold = 0.5 * (a + b)
    if threshold >= b:  # midpoint rounded up to the right value
        threshold = a
    return int(f), float(threshold), int(k)


def _filter_sorted(arr: np.ndarray, mask: np.ndarray, m_sub: int) -> np.ndarray:
    """Keep rows flagged per column, preserving each column's sort order."""
    out = np.empty((m_sub, arr.shape[1]), dtype=arr.dtype)
    for f in range(arr.shape[1]):
        out[:, f] = arr[mask[:, f], f]
    return out


def _grow_tree(
    x: np.ndarray,
    residuals: np.ndarray,
    params: TreeParams,
    root_order: np.ndarray,
    root_xs: np.ndarray,
    train_out: np.ndarray,
) -> Tree:
    """Grow one tree; ``train_out`` receives each training row's leaf value
    (cheaper than a post-hoc descent, and exact by construction)."""
    n = x.shape[0]
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    counts: list[int] = []

    def build(rows: np.ndarray, order: np.ndarray, xs: np.ndarray, depth: int) -> int:
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        leaf_value = float(residuals[rows].mean())
        value.append(leaf_value)
        counts.append(rows.shape[0])
        split = None
        if depth < params.max_depth and x.shape[1] > 0:
            rs = residuals[order]
            split = _best_split(xs, rs, residuals[rows], params.min_child_samples)
        if split is None:
            train_out[rows] = leaf_value
        else:
            f, t, k = split
            in_left = np.zeros(n, dtype=bool)
            in_left[order[: k + 1, f]] = True
            mask = in_left[order]
            m_left = k + 1
            feature[node] = f
            threshold[node] = t
            left[node] = build(
                rows[in_left[rows]],
                _filter_sorted(order, mask, m_left),
                _filter_sorted(xs, mask, m_left),
                depth + 1,
            )
            right[node] = build(
                rows[~in_left[rows]],
                _filter_sorted(order, ~mask, rows.shape[0] - m_left),
                _filter_sorted(xs, ~mask, rows.shape[0] - m_left),
                depth + 1,
            )
        return node

    build(np.arange(n), root_order, root_xs, 0)
    tree = Tree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        value=np.asarray(value, dtype=np.float64),
        n_samples=np.asarray(counts, dtype=np.int32),
    )
    for arr in (tree.feature, tree.threshold, tree.left, tree.right, tree.value, tree.n_samples):
        arr.setflags(write=False)
    return tree


def fit_boosted_trees(
    features: np.ndarray,
    targets: np.ndarray,
    params: TreeParams = TreeParams(),
    seed: int = 0,
) -> BoostedTreeModel:
    """Fit the boosted ensemble.

    ``features`` is (n, n_features); with fewer than 2 * min_child_samples
    rows no split is possible and the model predicts the target mean.
    """
    x = np.ascontiguousarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if x.ndim != 2:
        raise BoostingError("features must be a 2-d array")
    if y.ndim != 1 or y.shape[0] != x.shape[0]:
        raise BoostingError(
            f"feature/target length mismatch: {x.shape[0]} rows vs {y.shape[0]} targets"
        )
    if x.shape[0] == 0:
        raise BoostingError("empty training set")
    if np.isnan(x).any() or np.isnan(y).any():
        raise BoostingError("training data contains missing cells")

    # Features never change across boosting rounds: sort once, filter per node.
    root_order = np.argsort(x, axis=0, kind="stable")
    root_xs = np.ascontiguousarray(np.take_along_axis(x, root_order, axis=0))

    base = float(y.mean())
    pred = np.full(y.shape[0], base)
    train_out = np.empty(y.shape[0])
    trees = []
    for _ in range(params.n_trees):
        tree = _grow_tree(x, y - pred, params, root_order, root_xs, train_out)
        trees.append(tree)
        pred = pred + params.learning_rate * train_out
    trees = tuple(trees)
    return BoostedTreeModel(
        base_value=base,
        trees=trees,
        params=params,
        n_features=x.shape[1],
        seed=seed,
        flat=_flatten_trees(trees),
    )


def predict(model: BoostedTreeModel, features: np.ndarray) -> np.ndarray:
    """base_value + learning_rate * sum of tree outputs, per row."""
    x = np.ascontiguousarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise BoostingError(
            f"expected {model.n_features} features, got array of shape {x.shape}"
        )
    flat = model.flat if model.flat is not None else _flatten_trees(model.trees)
    return _kernel.predict_ensemble(
        x,
        flat.feature,
        flat.threshold,
        flat.left,
        flat.right,
        flat.value,
        flat.offsets,
        model.base_value,
        model.params.learning_rate,
    )


def leaf_sample_counts(model: BoostedTreeModel) -> list[int]:
    """Training-row counts of every split-created leaf (structural audit)."""
    counts: list[int] = []
    for tree in model.trees:
        if tree.is_stump():
            continue
        for i in range(tree.n_nodes):
            if tree.feature[i] < 0:
                counts.append(int(tree.n_samples[i]))
    return counts
