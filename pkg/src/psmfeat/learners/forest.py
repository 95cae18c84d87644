"""Random forest over binary features.

Every split tests one feature and sends rows with value 0 left, 1 right. Node
impurity is ``2 * (mean(y^2) - mean(y)^2)``, which is exactly the Gini impurity
``1 - p^2 - (1 - p)^2`` for 0/1 targets and the scaled variance for real ones.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int = 10
    max_features: int | None = None  # None -> ceil(sqrt(V))

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.max_features is not None and self.max_features < 1:
            raise ValueError("max_features must be >= 1")

    def features_per_split(self, n_candidates: int) -> int:
        if n_candidates == 0:
            return 0
        m = math.ceil(math.sqrt(n_candidates)) if self.max_features is None else self.max_features
        return min(m, n_candidates)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Tree:
    """Flat node arrays; ``feature[i] == -1`` marks a leaf."""

    feature: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                return self.value[node]
            r = rows[internal]
            f = feat[internal]
            go_right = X[r, f] != 0
            node[r] = np.where(go_right, self.right[node[r]], self.left[node[r]])

    def to_record(self, i: int = 0) -> dict:
        if self.feature[i] < 0:
            return {"value": float(self.value[i])}
        return {
            "feature": int(self.feature[i]),
            "left": self.to_record(int(self.left[i])),
            "right": self.to_record(int(self.right[i])),
        }

    @classmethod
    def from_record(cls, record: dict) -> "Tree":
        feature, left, right, value = [], [], [], []

        def visit(rec):
            i = len(feature)
            feature.append(-1)
            left.append(-1)
            right.append(-1)
            value.append(float("nan"))
            if "value" in rec:
                value[i] = float(rec["value"])
            else:
                feature[i] = int(rec["feature"])
                left[i] = visit(rec["left"])
                right[i] = visit(rec["right"])
            return i

        visit(record)
        return cls(
            np.array(feature, dtype=np.int64),
            np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64),
            np.array(value, dtype=np.float64),
        )


@dataclass(frozen=True)
class Forest:
    trees: tuple[Tree, ...]
    params: ForestParams
    seed: int
    n_features: int

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        for t in self.trees:
            internal = t.feature >= 0
            if np.any(t.feature[internal] >= self.n_features):
                raise ValueError("split feature id out of range")
            leaves = t.value[~internal]
            if np.any((leaves < 0) | (leaves > 1)):
                raise ValueError("leaf values must lie in [0, 1]")


def _dense(X) -> np.ndarray:
    if sp.issparse(X):
        return (X.toarray() != 0)
    return np.asarray(X) != 0


def _grow_tree(X, y, rows, candidates, params: ForestParams, rng) -> Tree:
    feature, left, right, value = [], [], [], []
    m = params.features_per_split(len(candidates))
    # stack of (node id, row indices, depth)
    stack = []

    def new_node(idx, depth):
        i = len(feature)
        feature.append(-1)
        left.append(-1)
        right.append(-1)
        value.append(float(y[idx].mean()))
        stack.append((i, idx, depth))
        return i

    new_node(rows, 0)
    while stack:
        i, idx, depth = stack.pop()
        yv = y[idx]
        if depth >= params.max_depth or len(idx) < 2 or yv.min() == yv.max() or m == 0:
            continue
        cand = candidates[rng.choice(len(candidates), size=m, replace=False)]
        sub = X[np.ix_(idx, cand)].astype(np.float64)
        nn = float(len(idx))
        s_all, q_all = yv.sum(), (yv * yv).sum()
        n_r = sub.sum(axis=0)
        s_r = yv @ sub
        q_r = (yv * yv) @ sub
        n_l, s_l, q_l = nn - n_r, s_all - s_r, q_all - q_r
        valid = (n_l > 0) & (n_r > 0)
        if not valid.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            child = 2.0 * (q_l - s_l**2 / n_l) + 2.0 * (q_r - s_r**2 / n_r)
        parent = 2.0 * (q_all - s_all**2 / nn)
        gain = np.where(valid, parent - child, -np.inf)
        best = int(np.argmax(gain))
        if not gain[best] > 1e-12:
            continue
        f = int(cand[best])
        mask = X[idx, f]
        feature[i] = f
        r_idx, l_idx = idx[mask], idx[~mask]
        left[i] = len(feature)
        new_node(l_idx, depth + 1)
        right[i] = len(feature)
        new_node(r_idx, depth + 1)
    return Tree(
        np.array(feature, dtype=np.int64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=np.float64),
    )


def train_forest(X, y, params: ForestParams | None = None, seed: int = 0, exclude=()) -> Forest:
    """Fit a bootstrap forest; ``exclude`` lists feature ids never used for splits."""
    params = params or ForestParams()
    Xd = _dense(X)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n, V = Xd.shape
    if n < 2:
        raise ValueError("need at least two rows")
    if len(y) != n:
        raise ValueError("row count does not match target length")
    excluded = set(int(e) for e in exclude)
    candidates = np.array([j for j in range(V) if j not in excluded], dtype=np.int64)
    trees = []
    for child in np.random.SeedSequence(seed).spawn(params.n_trees):
        rng = np.random.default_rng(child)
        boot = rng.integers(0, n, size=n)
        trees.append(_grow_tree(Xd, y, boot, candidates, params, rng))
    return Forest(tuple(trees), params, int(seed), V)


def forest_proba(forest: Forest, x):
    """Mean leaf value across trees for one row (scalar) or a matrix of rows (vector)."""
    if not forest.trees:
        raise ValueError("forest has no trees")
    single = not sp.issparse(x) and np.ndim(x) == 1
    X = _dense(x)
    if single:
        X = X.reshape(1, -1)
    if X.shape[1] != forest.n_features:
        raise ValueError(
            f"dimension mismatch: forest expects {forest.n_features} features, got {X.shape[1]}"
        )
    total = np.zeros(X.shape[0])
    for t in forest.trees:
        total += t.predict(X)
    out = total / len(forest.trees)
    return float(out[0]) if single else out
