"""
Bagged CART regression trees.

Trees are grown greedily with exact split search: every feature, every
midpoint between consecutive distinct values. A split is chosen to minimize
the summed squared error of the two children; near-ties (relative 1e-9 of the
node's squared error) go to the lowest feature index and then the lowest
threshold, which makes fitting fully deterministic. Splitting stops when the
node's labels are all equal or no split leaves ``min_leaf`` examples on both
sides.

Trees are stored as flat node arrays in preorder and serialized to JSON.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "LABEL_RANGE",
    "RegressionTree",
    "TreeEnsemble",
    "fit_tree",
    "fit_ensemble",
    "bootstrap_indices",
    "predict",
    "evaluate_mse",
    "split_score",
    "TIE_RTOL",
]

FORMAT_VERSION = 1
LABEL_RANGE = (0.001, 0.05)
TIE_RTOL = 1e-9
_LEAF = -1


@dataclass(frozen=True)
class RegressionTree:
    """
    Binary regression tree in flat preorder layout.

    Internal nodes route ``x[feature] <= threshold`` to ``left``; leaves have
    ``feature == -1`` and predict ``value``.
    """

    feature: NDArray
    threshold: NDArray
    left: NDArray
    right: NDArray
    value: NDArray
    n_samples: NDArray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def is_leaf(self) -> NDArray:
        return self.feature == _LEAF

    @property
    def leaf_values(self) -> NDArray:
        return self.value[self.is_leaf]

    def predict(self, X: ArrayLike) -> NDArray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = self.feature[node] != _LEAF
        while active.any():
            nd = node[active]
            go_left = X[rows[active], self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] != _LEAF
        return self.value[node]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_samples": self.n_samples.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=float),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            value=np.asarray(d["value"], dtype=float),
            n_samples=np.asarray(d["n_samples"], dtype=np.int64),
        )


def split_score(y_left: NDArray, y_right: NDArray) -> float:
    """Summed squared error of two children around their own means."""
    return float(((y_left - y_left.mean()) ** 2).sum() + ((y_right - y_right.mean()) ** 2).sum())


def _best_split(Xs: NDArray, ys: NDArray, min_leaf: int):
    """
    Best split of one node.

    ``Xs`` and ``ys`` have shape (F, n): for each feature, the node's feature
    values in ascending order and the labels in the same order.
    Returns ``(feature, position, threshold)`` or ``None``.
    """
    F, n = Xs.shape
    if n < 2 * min_leaf:
        return None
    yc = ys - ys[0].mean()
    cs = np.cumsum(yc, axis=1)
    cs2 = np.cumsum(yc * yc, axis=1)
    tot, tot2 = cs[0, -1], cs2[0, -1]

    lo, hi = min_leaf - 1, n - min_leaf  # left gets positions [0, i], i in [lo, hi)
    nl = np.arange(lo + 1, hi + 1, dtype=float)
    nr = n - nl
    s, s2 = cs[:, lo:hi], cs2[:, lo:hi]
    score = (s2 - s * s / nl) + ((tot2 - s2) - (tot - s) ** 2 / nr)
    valid = Xs[:, lo:hi] < Xs[:, lo + 1 : hi + 1]
    if not valid.any():
        return None
    score = np.where(valid, score, np.inf)
    best = score.min()
    node_sse = tot2 - tot * tot / n
    tied = score <= best + TIE_RTOL * max(node_sse, 0.0) + 1e-300
    # among ties: lowest feature first, then lowest threshold (the earliest sorted position)
    f = int(np.argmax(tied.any(axis=1)))
    i = int(np.argmax(tied[f])) + lo
    a, b = Xs[f, i], Xs[f, i + 1]
    thr = 0.5 * (a + b)
    if not a <= thr < b:
        thr = a
    return f, i, float(thr)


def fit_tree(X: ArrayLike, y: ArrayLike, min_leaf: int = 8) -> RegressionTree:
    """
    Grow one CART regression tree.

    Parameters
    ----------
    X : array-like, shape (n, F)
    y : array-like, shape (n,)
    min_leaf : int
        Minimum number of examples in every leaf.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be (n, F) and y must have n entries")
    if len(y) == 0:
        raise ValueError("cannot fit a tree on empty data")
    if min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")
    n, F = X.shape
    XT = np.ascontiguousarray(X.T)
    root = np.argsort(XT, axis=1, kind="stable")

    feature, threshold, left, right, value, counts = [], [], [], [], [], []

    def new_node(S):
        feature.append(_LEAF)
        threshold.append(0.0)
        left.append(_LEAF)
        right.append(_LEAF)
        # correctly rounded mean, independent of summation order
        value.append(math.fsum(y[S[0]].tolist()) / S.shape[1])
        counts.append(S.shape[1])
        return len(feature) - 1

    goes_left = np.zeros(n, dtype=bool)
    # nodes are numbered when popped, so popping left first yields preorder
    stack = [(None, None, root)]
    while stack:
        parent, side, S = stack.pop()
        node = new_node(S)
        if parent is not None:
            side[parent] = node
        ys = y[S]
        if ys[0].min() == ys[0].max():
            continue
        Xs = np.take_along_axis(XT, S, axis=1)
        split = _best_split(Xs, ys, min_leaf)
        if split is None:
            continue
        f, i, thr = split
        goes_left[S[0]] = False
        goes_left[S[f, : i + 1]] = True
        m = goes_left[S]
        nl = i + 1
        feature[node] = f
        threshold[node] = thr
        stack.append((node, right, S[~m].reshape(F, S.shape[1] - nl)))
        stack.append((node, left, S[m].reshape(F, nl)))

    return RegressionTree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=float),
        n_samples=np.asarray(counts, dtype=np.int64),
    )


@dataclass(frozen=True)
class TreeEnsemble:
    """Bagged trees; prediction is the mean tree output clamped to ``label_range``."""

    trees: tuple[RegressionTree, ...]
    seed: int
    min_leaf: int = 8
    label_range: tuple[float, float] = LABEL_RANGE
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.trees)

    def predict(self, X: ArrayLike) -> NDArray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        raw = np.mean([t.predict(X) for t in self.trees], axis=0)
        return np.clip(raw, *self.label_range)

    def to_json(self) -> str:
        doc = {
            "format_version": FORMAT_VERSION,
            "kind": "TreeEnsemble",
            "seed": self.seed,
            "min_leaf": self.min_leaf,
            "n_trees": len(self.trees),
            "label_range": list(self.label_range),
            "metadata": self.metadata,
            "trees": [t.to_dict() for t in self.trees],
        }
        return json.dumps(doc, separators=(",", ":"), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TreeEnsemble":
        doc = json.loads(text)
        if doc.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format_version {doc.get('format_version')!r}")
        return cls(
            trees=tuple(RegressionTree.from_dict(t) for t in doc["trees"]),
            seed=doc["seed"],
            min_leaf=doc["min_leaf"],
            label_range=tuple(doc["label_range"]),
            metadata=doc.get("metadata", {}),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "TreeEnsemble":
        return cls.from_json(Path(path).read_text())


def bootstrap_indices(n: int, n_trees: int, seed: int) -> list[NDArray]:
    """One bootstrap draw of ``n`` row indices per tree, each from its own spawned RNG stream."""
    children = np.random.SeedSequence(seed).spawn(n_trees)
    return [np.random.default_rng(c).integers(0, n, size=n) for c in children]


def fit_ensemble(
    X: ArrayLike,
    y: ArrayLike,
    n_trees: int = 30,
    min_leaf: int = 8,
    seed: int = 0,
    label_range: tuple[float, float] = LABEL_RANGE,
    n_jobs: int = 1,
) -> TreeEnsemble:
    """
    Fit ``n_trees`` trees on bootstrap resamples of ``(X, y)``.

    ``n_jobs > 1`` fits trees in parallel with joblib; the result does not
    depend on it.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    if len(y) == 0:
        raise ValueError("cannot fit an ensemble on empty data")
    boots = bootstrap_indices(len(y), n_trees, seed)
    if n_jobs == 1:
        trees = [fit_tree(X[b], y[b], min_leaf) for b in boots]
    else:
        from joblib import Parallel, delayed

        trees = Parallel(n_jobs=n_jobs)(delayed(fit_tree)(X[b], y[b], min_leaf) for b in boots)
    return TreeEnsemble(tuple(trees), seed=int(seed), min_leaf=min_leaf, label_range=tuple(label_range))


def predict(ens: TreeEnsemble, f: ArrayLike) -> float | NDArray:
    """Clamped ensemble estimate for one feature vector (float) or a batch (array)."""
    f = np.asarray(f, dtype=float)
    out = ens.predict(f)
    return float(out[0]) if f.ndim == 1 else out


def evaluate_mse(ens: TreeEnsemble, X: ArrayLike, y: ArrayLike) -> float:
    """Mean squared error of the ensemble over a labelled test set."""
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ValueError("test set is empty")
    return float(np.mean((y - ens.predict(X)) ** 2))
