"""Gradient-boosted decision trees with a binary-logistic objective.

Second-order (Newton) boosting: with predicted probability p and label
y, the per-row gradient is g = p - y and hessian h = p(1 - p). Each
tree is grown by exact greedy split search over sorted unique feature
values; a split's quality is the second-order gain

    0.5 * (GL^2/(HL+lambda) + GR^2/(HR+lambda) - G^2/(H+lambda))

and a leaf's weight is the closed-form Newton step -G/(H+lambda).
The model predicts sigmoid(base_score + learning_rate * sum of tree
outputs), with base_score the log-odds of the positive-class prior
(clamped to +-10). Training is deterministic given the seed; with
subsample = 1 it is bit-reproducible.

Used three ways downstream: two embedding classifiers with different
hyperparameter presets, and the final ranking ensemble over the
six-column feature rows.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateLabelsError, DimensionMismatchError, ParseError, VersionMismatchError

MODEL_FORMAT_VERSION = 1
_MIN_GAIN = 1e-12
_PROB_EPS = 1e-12

__all__ = [
    "GbdtParams",
    "TreeNode",
    "DecisionTree",
    "GbdtModel",
    "MatrixRow",
    "TrainingMatrix",
    "train",
    "pair_features",
    "save_model",
    "load_model",
]


@dataclass(frozen=True)
class GbdtParams:
    n_trees: int = 100
    max_depth: int = 3
    learning_rate: float = 0.1
    min_samples_leaf: int = 1
    l2_lambda: float = 1.0
    subsample: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 0:
            raise ValueError("n_trees must be >= 0")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.l2_lambda < 0.0:
            raise ValueError("l2_lambda must be >= 0")
        if not 0.0 < self.subsample <= 1.0:
            raise ValueError("subsample must be in (0, 1]")


@dataclass(frozen=True)
class TreeNode:
    """Internal node (feature/threshold/children) or leaf (weight).

    Children are indexes into the owning tree's node array; -1 marks a
    leaf. Routing sends `x[feature] <= threshold` left.
    """

    feature: int = -1
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    weight: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass(frozen=True)
class DecisionTree:
    nodes: tuple[TreeNode, ...]

    def output(self, x: Sequence[float]) -> float:
        node = self.nodes[0]
        while not node.is_leaf:
            node = self.nodes[node.left if x[node.feature] <= node.threshold else node.right]
        return node.weight

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Vectorized `output` over the rows of X."""
        out = np.empty(len(X), dtype=float)
        stack = [(0, np.arange(len(X)))]
        while stack:
            node_idx, rows = stack.pop()
            node = self.nodes[node_idx]
            if node.is_leaf:
                out[rows] = node.weight
                continue
            mask = X[rows, node.feature] <= node.threshold
            stack.append((node.left, rows[mask]))
            stack.append((node.right, rows[~mask]))
        return out

    @property
    def depth(self) -> int:
        def walk(i: int) -> int:
            node = self.nodes[i]
            if node.is_leaf:
                return 0
            return 1 + max(walk(node.left), walk(node.right))

        return walk(0)


@dataclass(frozen=True)
class GbdtModel:
    base_score: float
    trees: tuple[DecisionTree, ...]
    params: GbdtParams
    feature_names: tuple[str, ...]
    train_loss: tuple[float, ...] = field(default=(), compare=False)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def margin(self, features: Sequence[float]) -> float:
        if len(features) != self.n_features:
            raise DimensionMismatchError(
                f"expected {self.n_features} features, got {len(features)}"
            )
        return self.base_score + self.params.learning_rate * sum(
            tree.output(features) for tree in self.trees
        )

    def predict(self, features: Sequence[float]) -> float:
        """Probability in (0, 1) that the row is a positive pair."""
        return float(_sigmoid_scalar(self.margin(features)))

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatchError(
                f"expected (*, {self.n_features}) feature matrix, got {X.shape}"
            )
        margins = np.full(len(X), self.base_score)
        for tree in self.trees:
            margins += self.params.learning_rate * tree.apply(X)
        return np.clip(_sigmoid(margins), _PROB_EPS, 1.0 - _PROB_EPS)


@dataclass(frozen=True)
class MatrixRow:
    features: tuple[float, ...]
    label: int
    group_id: str
    candidate: Optional[tuple[str, str]] = None


@dataclass(frozen=True)
class TrainingMatrix:
    rows: tuple[MatrixRow, ...]
    feature_names: tuple[str, ...] = ()

    def to_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.rows:
            raise DegenerateLabelsError("empty training matrix")
        dims = {len(r.features) for r in self.rows}
        if len(dims) != 1:
            raise DimensionMismatchError(f"ragged feature rows: dims {sorted(dims)}")
        X = np.array([r.features for r in self.rows], dtype=float)
        y = np.array([r.label for r in self.rows], dtype=float)
        return X, y

    def names(self) -> tuple[str, ...]:
        if self.feature_names:
            return self.feature_names
        dim = len(self.rows[0].features)
        return tuple(f"f{i}" for i in range(dim))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _sigmoid_scalar(x: float) -> float:
    if x >= 0:
        p = 1.0 / (1.0 + math.exp(-min(x, 700.0)))
    else:
        ex = math.exp(max(x, -700.0))
        p = ex / (1.0 + ex)
    return min(max(p, _PROB_EPS), 1.0 - _PROB_EPS)


def _log_loss(y: np.ndarray, p: np.ndarray) -> float:
    p = np.clip(p, 1e-15, 1.0 - 1e-15)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def _best_split(
    X: np.ndarray, g: np.ndarray, h: np.ndarray, rows: np.ndarray, params: GbdtParams
) -> Optional[tuple[float, int, float]]:
    """Exact greedy search; returns (gain, feature, threshold) or None.

    Candidate thresholds are midpoints between consecutive distinct
    sorted values. Ties keep the lowest feature index and lowest
    threshold, so training is order-deterministic.
    """
    lam = params.l2_lambda
    g_sum = float(g[rows].sum())
    h_sum = float(h[rows].sum())
    parent = g_sum * g_sum / (h_sum + lam)
    n = rows.size
    counts = np.arange(1, n)
    best: Optional[tuple[float, int, float]] = None
    for f in range(X.shape[1]):
        v = X[rows, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        if vs[0] == vs[-1]:
            continue
        gl = np.cumsum(g[rows][order])[:-1]
        hl = np.cumsum(h[rows][order])[:-1]
        valid = (
            (vs[1:] != vs[:-1])
            & (counts >= params.min_samples_leaf)
            & (n - counts >= params.min_samples_leaf)
        )
        if not valid.any():
            continue
        gr = g_sum - gl
        hr = h_sum - hl
        gains = np.where(valid, gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent, -np.inf)
        i = int(np.argmax(gains))
        gain = 0.5 * float(gains[i])
        if gain > _MIN_GAIN and (best is None or gain > best[0]):
            best = (gain, f, float((vs[i] + vs[i + 1]) / 2.0))
    return best


def _grow_tree(
    X: np.ndarray, g: np.ndarray, h: np.ndarray, rows: np.ndarray, params: GbdtParams
) -> DecisionTree:
    nodes: list[Optional[TreeNode]] = []

    def grow(rows: np.ndarray, depth: int) -> int:
        idx = len(nodes)
        nodes.append(None)
        split = None
        if depth < params.max_depth and rows.size >= 2 * params.min_samples_leaf:
            split = _best_split(X, g, h, rows, params)
        if split is None:
            weight = -float(g[rows].sum()) / (float(h[rows].sum()) + params.l2_lambda)
            nodes[idx] = TreeNode(weight=weight)
        else:
            _, feature, threshold = split
            mask = X[rows, feature] <= threshold
            left = grow(rows[mask], depth + 1)
            right = grow(rows[~mask], depth + 1)
            nodes[idx] = TreeNode(feature=feature, threshold=threshold, left=left, right=right)
        return idx

    grow(rows, 0)
    return DecisionTree(tuple(nodes))  # type: ignore[arg-type]


def train(matrix: TrainingMatrix, params: GbdtParams) -> GbdtModel:
    """Fit the boosted ensemble; raises DegenerateLabelsError unless both
    classes are present. The returned model records the training
    log-loss curve (length n_trees + 1, starting at the prior)."""
    X, y = matrix.to_arrays()
    if len(np.unique(y)) < 2:
        raise DegenerateLabelsError("training labels contain a single class")

    prior = float(y.mean())
    base = float(np.clip(math.log(prior / (1.0 - prior)), -10.0, 10.0))
    n = len(y)
    rng = np.random.default_rng(params.seed)
    margins = np.full(n, base)
    losses = [_log_loss(y, _sigmoid(margins))]
    trees: list[DecisionTree] = []
    for _ in range(params.n_trees):
        p = _sigmoid(margins)
        g = p - y
        h = p * (1.0 - p)
        if params.subsample < 1.0:
            k = max(1, int(round(params.subsample * n)))
            rows = np.sort(rng.choice(n, size=k, replace=False))
        else:
            rows = np.arange(n)
        tree = _grow_tree(X, g, h, rows, params)
        trees.append(tree)
        margins += params.learning_rate * tree.apply(X)
        losses.append(_log_loss(y, _sigmoid(margins)))

    return GbdtModel(base, tuple(trees), params, matrix.names(), tuple(losses))


def pair_features(q_vec: Sequence[float], d_vec: Sequence[float]) -> np.ndarray:
    """Interaction features for an embedding pair:
    [q, d, q*d elementwise, |q - d| elementwise], length 4 * dim."""
    q = np.asarray(q_vec, dtype=float)
    d = np.asarray(d_vec, dtype=float)
    if q.shape != d.shape or q.ndim != 1:
        raise DimensionMismatchError(f"pair shapes {q.shape} vs {d.shape}")
    return np.concatenate([q, d, q * d, np.abs(q - d)])


def _node_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"weight": node.weight}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": node.left,
        "right": node.right,
    }


def _node_from_dict(obj: dict) -> TreeNode:
    if "weight" in obj:
        return TreeNode(weight=float(obj["weight"]))
    return TreeNode(
        feature=int(obj["feature"]),
        threshold=float(obj["threshold"]),
        left=int(obj["left"]),
        right=int(obj["right"]),
    )


def save_model(model: GbdtModel, path: str | Path) -> None:
    payload = {
        "version": MODEL_FORMAT_VERSION,
        "params": {
            "n_trees": model.params.n_trees,
            "max_depth": model.params.max_depth,
            "learning_rate": model.params.learning_rate,
            "min_samples_leaf": model.params.min_samples_leaf,
            "l2_lambda": model.params.l2_lambda,
            "subsample": model.params.subsample,
            "seed": model.params.seed,
        },
        "base_score": model.base_score,
        "feature_names": list(model.feature_names),
        "trees": [{"nodes": [_node_to_dict(n) for n in tree.nodes]} for tree in model.trees],
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_model(path: str | Path) -> GbdtModel:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        version = payload["version"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ParseError(f"model file {path}: {exc}") from exc
    if version != MODEL_FORMAT_VERSION:
        raise VersionMismatchError(f"model file version {version!r} not supported")
    try:
        params = GbdtParams(**payload["params"])
        trees = tuple(
            DecisionTree(tuple(_node_from_dict(n) for n in tree["nodes"]))
            for tree in payload["trees"]
        )
        return GbdtModel(
            base_score=float(payload["base_score"]),
            trees=trees,
            params=params,
            feature_names=tuple(payload["feature_names"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"model file {path}: {exc}") from exc
