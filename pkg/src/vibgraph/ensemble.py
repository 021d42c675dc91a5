"""Weighted soft-voting ensemble over node embeddings.

Four base classifiers (random forest, first-order gradient boosting,
second-order boosting with L2 leaf regularization, and a small feed-forward
net on the autodiff engine) are combined by simplex weights fitted on
out-of-fold predictions by exhaustive grid search.
"""

from __future__ import annotations

import json

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .graph import atomic_write_text

ENSEMBLE_FORMAT_VERSION = 1

PROB_CLIP = 1e-12


def cross_entropy(probs, labels) -> float:
    """Mean negative log-probability of the true class, probabilities clipped."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    p_true = np.clip(probs[np.arange(len(labels)), labels], PROB_CLIP, 1.0)
    return float(-np.log(p_true).mean())


def _check_labels(labels):
    labels = np.asarray(labels, dtype=np.int64)
    classes = np.unique(labels)
    if len(classes) < 2:
        raise ValueError("training requires at least 2 classes")
    return labels, int(labels.max()) + 1


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# decision trees


class _Node:
    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, value=None):
        self.feature = -1
        self.threshold = 0.0
        self.left = None
        self.right = None
        self.value = value    # leaf payload: class-frequency or scalar score

    def is_leaf(self):
        return self.left is None

    def to_dict(self):
        if self.is_leaf():
            v = self.value
            return {"value": v.tolist() if isinstance(v, np.ndarray) else v}
        return {"feature": self.feature, "threshold": self.threshold,
                "left": self.left.to_dict(), "right": self.right.to_dict()}

    @classmethod
    def from_dict(cls, d):
        node = cls()
        if "value" in d:
            v = d["value"]
            node.value = np.asarray(v) if isinstance(v, list) else v
            return node
        node.feature = d["feature"]
        node.threshold = d["threshold"]
        node.left = cls.from_dict(d["left"])
        node.right = cls.from_dict(d["right"])
        return node


def _tree_apply(node, X, width):
    out = np.empty((len(X), width)) if width > 1 else np.empty(len(X))
    stack = [(node, np.arange(len(X)))]
    while stack:
        nd, idx = stack.pop()
        if len(idx) == 0:
            continue
        if nd.is_leaf():
            out[idx] = nd.value
            continue
        go_left = X[idx, nd.feature] <= nd.threshold
        stack.append((nd.left, idx[go_left]))
        stack.append((nd.right, idx[~go_left]))
    return out


def _best_split_gini(X, onehot, feat_ids):
    """Best (feature, threshold) by Gini impurity decrease; None if no split."""
    n = len(X)
    total = onehot.sum(axis=0)
    best = (None, 0.0, -1e-12)
    for f in feat_ids:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        cum = np.cumsum(onehot[order], axis=0)     # n x C left counts
        valid = np.flatnonzero(xs[:-1] < xs[1:])   # split between i and i+1
        if len(valid) == 0:
            continue
        nl = (valid + 1).astype(np.float64)
        nr = n - nl
        left = cum[valid]
        right = total - left
        gini_l = 1.0 - ((left / nl[:, None]) ** 2).sum(axis=1)
        gini_r = 1.0 - ((right / nr[:, None]) ** 2).sum(axis=1)
        parent = 1.0 - ((total / n) ** 2).sum()
        gain = parent - (nl * gini_l + nr * gini_r) / n
        k = int(np.argmax(gain))
        if gain[k] > best[2]:
            best = (f, 0.5 * (xs[valid[k]] + xs[valid[k] + 1]), float(gain[k]))
    return best if best[0] is not None else None


def _best_split_sse(X, target, feat_ids):
    """Best split by sum-of-squares reduction of a scalar regression target."""
    n = len(X)
    total_sum = target.sum()
    best = (None, 0.0, 1e-12)
    for f in feat_ids:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        cum = np.cumsum(target[order])
        valid = np.flatnonzero(xs[:-1] < xs[1:])
        if len(valid) == 0:
            continue
        nl = (valid + 1).astype(np.float64)
        nr = n - nl
        left = cum[valid]
        right = total_sum - left
        # maximizing sum(left)^2/nl + sum(right)^2/nr minimizes total SSE
        gain = left ** 2 / nl + right ** 2 / nr - total_sum ** 2 / n
        k = int(np.argmax(gain))
        if gain[k] > best[2]:
            best = (f, 0.5 * (xs[valid[k]] + xs[valid[k] + 1]), float(gain[k]))
    return best if best[0] is not None else None


def _grow_classification_tree(X, onehot, depth, max_depth, n_sub, rng):
    node = _Node()
    counts = onehot.sum(axis=0)
    if depth >= max_depth or len(X) < 2 or counts.max() == counts.sum():
        node.value = counts / counts.sum()
        return node
    feat_ids = rng.choice(X.shape[1], size=n_sub, replace=False)
    split = _best_split_gini(X, onehot, feat_ids)
    if split is None:
        node.value = counts / counts.sum()
        return node
    f, t, _ = split
    go_left = X[:, f] <= t
    node.feature, node.threshold = int(f), float(t)
    node.left = _grow_classification_tree(X[go_left], onehot[go_left],
                                          depth + 1, max_depth, n_sub, rng)
    node.right = _grow_classification_tree(X[~go_left], onehot[~go_left],
                                           depth + 1, max_depth, n_sub, rng)
    return node


def _grow_regression_tree(X, residual, g, h, depth, max_depth, l2_leaf, newton):
    """Structure fit on the residual; leaf values first-order mean or Newton."""
    node = _Node()

    def leaf():
        if newton:
            node.value = float(-g.sum() / (h.sum() + l2_leaf))
        else:
            node.value = float(residual.mean())
        return node

    if depth >= max_depth or len(X) < 2:
        return leaf()
    split = _best_split_sse(X, residual, range(X.shape[1]))
    if split is None:
        return leaf()
    f, t, _ = split
    go_left = X[:, f] <= t
    node.feature, node.threshold = int(f), float(t)
    node.left = _grow_regression_tree(X[go_left], residual[go_left], g[go_left],
                                      h[go_left], depth + 1, max_depth, l2_leaf, newton)
    node.right = _grow_regression_tree(X[~go_left], residual[~go_left], g[~go_left],
                                       h[~go_left], depth + 1, max_depth, l2_leaf, newton)
    return node


# ---------------------------------------------------------------------------
# base classifiers


class BaseClassifier:
    kind = "base"

    def predict_proba(self, X):
        raise NotImplementedError

    def state(self):
        raise NotImplementedError


class RandomForest(BaseClassifier):
    """Bagged CART trees: Gini splits, sqrt(d) feature subsampling, bootstrap rows."""

    kind = "random_forest"

    def __init__(self, trees=None, n_classes=0):
        self.trees = trees or []
        self.n_classes = n_classes

    def predict_proba(self, X):
        X = np.asarray(X, dtype=np.float64)
        acc = np.zeros((len(X), self.n_classes))
        for tree in self.trees:
            acc += _tree_apply(tree, X, self.n_classes)
        return acc / len(self.trees)

    def state(self):
        return {"n_classes": self.n_classes,
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_state(cls, s):
        return cls(trees=[_Node.from_dict(t) for t in s["trees"]],
                   n_classes=s["n_classes"])


def train_random_forest(X, labels, n_trees=100, max_depth=8, seed=0) -> RandomForest:
    X = np.asarray(X, dtype=np.float64)
    labels, C = _check_labels(labels)
    onehot = np.eye(C)[labels]
    rng = np.random.default_rng(seed)
    n_sub = max(1, int(np.sqrt(X.shape[1])))
    trees = []
    for _ in range(n_trees):
        boot = rng.integers(0, len(X), size=len(X))
        trees.append(_grow_classification_tree(X[boot], onehot[boot], 0,
                                               max_depth, n_sub, rng))
    return RandomForest(trees=trees, n_classes=C)


class Boosting(BaseClassifier):
    """One-vs-all additive trees on softmax cross-entropy.

    First-order mode fits mean-residual leaves; Newton mode uses
    -sum(g)/(sum(h) + l2_leaf) leaf values from per-sample gradients and
    Hessians.
    """

    def __init__(self, kind, trees=None, prior_scores=None, learning_rate=0.1,
                 n_classes=0):
        self.kind = kind
        self.trees = trees or []          # list of rounds, each a list of C trees
        self.prior_scores = prior_scores
        self.learning_rate = learning_rate
        self.n_classes = n_classes

    def _scores(self, X):
        scores = np.tile(self.prior_scores, (len(X), 1))
        for round_trees in self.trees:
            for c, tree in enumerate(round_trees):
                scores[:, c] += self.learning_rate * _tree_apply(tree, X, 1)
        return scores

    def predict_proba(self, X):
        return _softmax(self._scores(np.asarray(X, dtype=np.float64)))

    def state(self):
        return {"n_classes": self.n_classes,
                "learning_rate": self.learning_rate,
                "prior_scores": self.prior_scores.tolist(),
                "trees": [[t.to_dict() for t in rnd] for rnd in self.trees]}

    @classmethod
    def from_state(cls, kind, s):
        return cls(kind,
                   trees=[[_Node.from_dict(t) for t in rnd] for rnd in s["trees"]],
                   prior_scores=np.asarray(s["prior_scores"]),
                   learning_rate=s["learning_rate"], n_classes=s["n_classes"])


def _train_boosting(X, labels, n_rounds, learning_rate, depth, l2_leaf, newton,
                    kind):
    X = np.asarray(X, dtype=np.float64)
    labels, C = _check_labels(labels)
    onehot = np.eye(C)[labels]
    prior = np.log(np.clip(onehot.mean(axis=0), PROB_CLIP, 1.0))
    model = Boosting(kind, prior_scores=prior, learning_rate=learning_rate,
                     n_classes=C)
    scores = np.tile(prior, (len(X), 1))
    for _ in range(n_rounds):
        p = _softmax(scores)
        round_trees = []
        for c in range(C):
            residual = onehot[:, c] - p[:, c]       # negative gradient
            g = p[:, c] - onehot[:, c]
            h = p[:, c] * (1.0 - p[:, c])
            tree = _grow_regression_tree(X, residual, g, h, 0, depth, l2_leaf,
                                         newton)
            round_trees.append(tree)
            scores[:, c] += learning_rate * _tree_apply(tree, X, 1)
        model.trees.append(round_trees)
    return model


def train_gradient_boosting(X, labels, n_rounds=100, learning_rate=0.1,
                            depth=3, seed=0) -> Boosting:
    # deterministic given data; seed kept for interface uniformity
    return _train_boosting(X, labels, n_rounds, learning_rate, depth,
                           l2_leaf=0.0, newton=False, kind="gradient_boosting")


def train_regularized_boosting(X, labels, n_rounds=100, learning_rate=0.1,
                               depth=3, l2_leaf=1.0, seed=0) -> Boosting:
    return _train_boosting(X, labels, n_rounds, learning_rate, depth,
                           l2_leaf=l2_leaf, newton=True,
                           kind="regularized_boosting")


class MLPClassifier(BaseClassifier):
    """Single-hidden-layer softmax classifier trained with Adam on the
    autodiff engine."""

    kind = "feed_forward_net"

    def __init__(self, W1, b1, W2, b2, n_classes):
        self.W1, self.b1, self.W2, self.b2 = W1, b1, W2, b2
        self.n_classes = n_classes

    def _logits(self, X):
        H = np.maximum(X @ self.W1 + self.b1, 0.0)
        return H @ self.W2 + self.b2

    def predict_proba(self, X):
        return _softmax(self._logits(np.asarray(X, dtype=np.float64)))

    def state(self):
        return {"n_classes": self.n_classes,
                "W1": self.W1.tolist(), "b1": self.b1.tolist(),
                "W2": self.W2.tolist(), "b2": self.b2.tolist()}

    @classmethod
    def from_state(cls, s):
        return cls(np.asarray(s["W1"]), np.asarray(s["b1"]),
                   np.asarray(s["W2"]), np.asarray(s["b2"]), s["n_classes"])


def mlp_loss(params, X_arr, onehot):
    """Cross-entropy of the MLP as an autodiff scalar (also used by grad tests)."""
    W1, b1, W2, b2 = params
    X = Tensor(X_arr)
    H = ad.relu(ad.add(ad.matmul(X, W1), b1))
    logits = ad.add(ad.matmul(H, W2), b2)
    probs = ad.row_softmax(logits)
    safe = ad.add(probs, Tensor(np.full(probs.shape, PROB_CLIP)))
    picked = ad.mul(ad.log(safe), Tensor(onehot))
    return ad.scalar_mul(ad.tsum(picked), -1.0 / len(X_arr))


def train_mlp_classifier(X, labels, hidden=32, epochs=200, lr=1e-2,
                         seed=0) -> MLPClassifier:
    X = np.asarray(X, dtype=np.float64)
    labels, C = _check_labels(labels)
    onehot = np.eye(C)[labels]
    rng = np.random.default_rng(seed)
    d = X.shape[1]
    scale1 = np.sqrt(2.0 / d)
    scale2 = np.sqrt(2.0 / hidden)
    W1 = Tensor(rng.normal(0, scale1, (d, hidden)), requires_grad=True)
    b1 = Tensor(np.zeros((1, hidden)), requires_grad=True)
    W2 = Tensor(rng.normal(0, scale2, (hidden, C)), requires_grad=True)
    b2 = Tensor(np.zeros((1, C)), requires_grad=True)
    params = (W1, b1, W2, b2)
    opt = ad.AdamState(params, lr=lr)
    for _ in range(epochs):
        loss = mlp_loss(params, X, onehot)
        ad.backward(loss)
        ad.adam_step(opt)
    return MLPClassifier(W1.values, b1.values, W2.values, b2.values, C)


# ---------------------------------------------------------------------------
# soft-voting ensemble


BASE_KINDS = ("random_forest", "gradient_boosting", "regularized_boosting",
              "feed_forward_net")


def _simplex_grid(resolution=20):
    """All weight vectors on the 4-simplex with coordinates k/resolution."""
    grid = []
    for a in range(resolution + 1):
        for b in range(resolution + 1 - a):
            for c in range(resolution + 1 - a - b):
                d = resolution - a - b - c
                grid.append((a / resolution, b / resolution,
                             c / resolution, d / resolution))
    return np.asarray(grid)


def _weight_entropy(w):
    p = w[w > 0]
    return float(-(p * np.log(p)).sum())


def fit_ensemble_weights(base_probs, labels, resolution=20) -> np.ndarray:
    """Grid search on the 4-simplex minimizing out-of-fold cross-entropy.

    ``base_probs`` is a sequence of four n x C out-of-fold probability
    matrices (no leakage). Ties break toward the maximum-entropy (most
    uniform) weight vector.
    """
    if len(base_probs) != len(BASE_KINDS):
        raise ValueError(f"expected {len(BASE_KINDS)} probability matrices")
    labels = np.asarray(labels, dtype=np.int64)
    stack = np.stack([np.asarray(p, dtype=np.float64) for p in base_probs])
    n = stack.shape[1]
    p_true = np.clip(stack[:, np.arange(n), labels], PROB_CLIP, 1.0)  # 4 x n

    grid = _simplex_grid(resolution)
    mixed = np.clip(grid @ p_true, PROB_CLIP, 1.0)     # grid x n
    ce = -np.log(mixed).mean(axis=1)
    lo = ce.min()
    tied = np.flatnonzero(ce <= lo + 1e-12 * (1.0 + abs(lo)))
    best = tied[int(np.argmax([_weight_entropy(grid[k]) for k in tied]))]
    return grid[best]


class EnsembleModel:
    """Four fitted base classifiers plus simplex mixing weights."""

    def __init__(self, bases, weights, n_classes):
        if len(bases) != len(BASE_KINDS):
            raise ValueError("ensemble needs exactly four base classifiers")
        weights = np.asarray(weights, dtype=np.float64)
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be non-negative and sum to 1")
        self.bases = list(bases)
        self.weights = weights
        self.n_classes = n_classes

    def predict_proba(self, X):
        X = np.asarray(X, dtype=np.float64)
        out = np.zeros((len(X), self.n_classes))
        for w, base in zip(self.weights, self.bases):
            probs = base.predict_proba(X)
            if probs.shape[1] != self.n_classes:
                raise ValueError(
                    f"base classifier emitted {probs.shape[1]} columns, "
                    f"expected {self.n_classes}")
            out += w * probs
        return out

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)


def ensemble_predict_proba(model: EnsembleModel, X) -> np.ndarray:
    return model.predict_proba(X)


DEFAULT_HYPERPARAMS = {
    "rf_trees": 100, "rf_depth": 8,
    "gb_rounds": 100, "gb_lr": 0.1, "gb_depth": 3,
    "xgb_rounds": 100, "xgb_lr": 0.1, "xgb_depth": 3, "xgb_l2": 1.0,
    "mlp_hidden": 32, "mlp_epochs": 200, "mlp_lr": 1e-2,
    "cv_folds": 5,
}


def _train_bases(X, labels, hp, seed):
    return [
        train_random_forest(X, labels, hp["rf_trees"], hp["rf_depth"], seed),
        train_gradient_boosting(X, labels, hp["gb_rounds"], hp["gb_lr"],
                                hp["gb_depth"], seed),
        train_regularized_boosting(X, labels, hp["xgb_rounds"], hp["xgb_lr"],
                                   hp["xgb_depth"], hp["xgb_l2"], seed),
        train_mlp_classifier(X, labels, hp["mlp_hidden"], hp["mlp_epochs"],
                             hp["mlp_lr"], seed),
    ]


def stratified_folds(labels, n_folds, rng):
    """Class-balanced fold assignment; every fold must contain every class."""
    labels = np.asarray(labels)
    assign = np.empty(len(labels), dtype=np.int64)
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        if len(idx) < n_folds:
            raise ValueError(
                f"class {cls} has {len(idx)} samples, fewer than {n_folds} folds")
        assign[idx] = np.arange(len(idx)) % n_folds
    return assign


def fit_ensemble(X, labels, hyperparams=None, seed=0) -> EnsembleModel:
    """Cross-validated weight fitting followed by a full-data refit of the bases."""
    hp = dict(DEFAULT_HYPERPARAMS, **(hyperparams or {}))
    X = np.asarray(X, dtype=np.float64)
    labels, C = _check_labels(labels)
    rng = np.random.default_rng(seed)
    assign = stratified_folds(labels, hp["cv_folds"], rng)

    oof = [np.zeros((len(X), C)) for _ in BASE_KINDS]
    for fold in range(hp["cv_folds"]):
        tr = assign != fold
        te = ~tr
        bases = _train_bases(X[tr], labels[tr], hp, seed)
        for k, base in enumerate(bases):
            oof[k][te] = base.predict_proba(X[te])

    weights = fit_ensemble_weights(oof, labels)
    bases = _train_bases(X, labels, hp, seed)
    model = EnsembleModel(bases, weights, C)
    model.oof_probs = oof
    return model


# ---------------------------------------------------------------------------
# serialization


def save_ensemble(model: EnsembleModel, path: str) -> None:
    doc = {
        "format_version": ENSEMBLE_FORMAT_VERSION,
        "n_classes": model.n_classes,
        "weights": model.weights.tolist(),
        "bases": {base.kind: base.state() for base in model.bases},
    }
    atomic_write_text(path, json.dumps(doc, sort_keys=True))


def load_ensemble(path: str) -> EnsembleModel:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format_version") != ENSEMBLE_FORMAT_VERSION:
        raise ValueError(f"unsupported ensemble format {doc.get('format_version')}")
    b = doc["bases"]
    bases = [
        RandomForest.from_state(b["random_forest"]),
        Boosting.from_state("gradient_boosting", b["gradient_boosting"]),
        Boosting.from_state("regularized_boosting", b["regularized_boosting"]),
        MLPClassifier.from_state(b["feed_forward_net"]),
    ]
    return EnsembleModel(bases, np.asarray(doc["weights"]), doc["n_classes"])
