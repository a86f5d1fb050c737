"""Probabilistic classifiers and mixture arithmetic.

Two trainable scorers back the decision models: a greedy gini decision tree
for the discrete settings and a gradient-descent logistic regression for the
continuous ones. Both expose calibrated-frequency scores in [0, 1]; decisions
threshold the score at ``t_c``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ModelError(ValueError):
    pass


@dataclass
class LabeledData:
    """Feature matrix plus binary labels; the unit models are trained on."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise ModelError("features and labels must align")

    def __len__(self):
        return self.features.shape[0]


@dataclass
class Classifier:
    """Score function with a decision threshold; decide(x) = 1[score >= t_c]."""

    scorer: callable
    t_c: float = 0.5
    backend: str = "oracle"
    serialized: str = None

    def score(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.asarray(self.scorer(X), dtype=float)

    def decide(self, X):
        return (self.score(X) >= self.t_c).astype(np.int64)

    def decide_row(self, x):
        return int(self.decide(np.atleast_2d(x))[0])

    def accuracy(self, X, labels):
        return float(np.mean(self.decide(X) == np.asarray(labels)))

    def to_text(self):
        if self.serialized is None:
            raise ModelError(f"{self.backend} classifier has no serialized form")
        return f"backend: {self.backend}\nt_c: {self.t_c!r}\n{self.serialized}"


# -- decision tree -----------------------------------------------------------


@dataclass
class TreeParams:
    max_depth: int = None
    min_samples_leaf: int = 1

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 1:
            raise ModelError("max_depth must be positive")
        if self.min_samples_leaf < 1:
            raise ModelError("min_samples_leaf must be positive")


@dataclass
class _TreeNode:
    prob: float
    n: int
    feature: int = None
    threshold: float = None
    left: "_TreeNode" = None
    right: "_TreeNode" = None

    @property
    def is_leaf(self):
        return self.feature is None


def _gini_split_gain(col, labels):
    """Best threshold for one feature by weighted gini; returns (gain, threshold).

    Candidates are midpoints between consecutive distinct values, scanned in
    increasing order so equal gains resolve to the lowest threshold.
    """
    order = np.argsort(col, kind="stable")
    sv = col[order]
    sy = labels[order]
    change = np.nonzero(sv[:-1] != sv[1:])[0]
    if change.size == 0:
        return -1.0, None
    n = sy.shape[0]
    pos = np.cumsum(sy)
    n_left = change + 1
    n_right = n - n_left
    pos_left = pos[change]
    pos_right = pos[-1] - pos_left
    gini_left = 1.0 - (pos_left / n_left) ** 2 - ((n_left - pos_left) / n_left) ** 2
    gini_right = 1.0 - (pos_right / n_right) ** 2 - ((n_right - pos_right) / n_right) ** 2
    p_all = pos[-1] / n
    parent = 1.0 - p_all**2 - (1.0 - p_all) ** 2
    gains = parent - (n_left / n) * gini_left - (n_right / n) * gini_right
    best = int(np.argmax(gains))  # first max: lowest threshold wins ties
    thr = 0.5 * (sv[change[best]] + sv[change[best] + 1])
    return float(gains[best]), float(thr)


def _grow(X, labels, depth, params):
    node = _TreeNode(prob=float(labels.mean()), n=int(labels.shape[0]))
    if labels.shape[0] < 2 * params.min_samples_leaf:
        return node
    if params.max_depth is not None and depth >= params.max_depth:
        return node
    if node.prob in (0.0, 1.0):
        return node
    best_gain, best_feat, best_thr = 1e-12, None, None
    for j in range(X.shape[1]):  # ascending: lowest feature index wins ties
        gain, thr = _gini_split_gain(X[:, j], labels)
        if thr is not None and gain > best_gain:
            mask = X[:, j] <= thr
            k = int(mask.sum())
            if min(k, labels.shape[0] - k) >= params.min_samples_leaf:
                best_gain, best_feat, best_thr = gain, j, thr
    if best_feat is None:
        return node
    mask = X[:, best_feat] <= best_thr
    node.feature = best_feat
    node.threshold = best_thr
    node.left = _grow(X[mask], labels[mask], depth + 1, params)
    node.right = _grow(X[~mask], labels[~mask], depth + 1, params)
    return node


def _tree_predict(node, X, out, idx):
    if node.is_leaf:
        out[idx] = node.prob
        return
    mask = X[idx, node.feature] <= node.threshold
    _tree_predict(node.left, X, out, idx[mask])
    _tree_predict(node.right, X, out, idx[~mask])


def _tree_text(node, depth=0):
    pad = "  " * depth
    if node.is_leaf:
        return f"{pad}leaf p={node.prob!r} n={node.n}\n"
    return (
        f"{pad}split feature={node.feature} threshold={node.threshold!r} n={node.n}\n"
        + _tree_text(node.left, depth + 1)
        + _tree_text(node.right, depth + 1)
    )


def fit_tree(data: LabeledData, params: TreeParams = None, rng=None, t_c=0.5) -> Classifier:
    """Greedy gini tree; leaf score is the raw label frequency at the leaf.

    Construction is deterministic: ties between splits resolve to the lowest
    feature index, then the lowest threshold, so the rng handle is unused.
    """
    if len(data) == 0:
        raise ModelError("cannot fit a tree on an empty dataset")
    params = params or TreeParams()
    root = _grow(data.features, data.labels, 0, params)

    def scorer(X, root=root):
        out = np.empty(X.shape[0], dtype=float)
        _tree_predict(root, X, out, np.arange(X.shape[0]))
        return out

    return Classifier(scorer=scorer, t_c=t_c, backend="tree", serialized=_tree_text(root))


# -- logistic regression -----------------------------------------------------


@dataclass
class LogisticParams:
    learning_rate: float = 1.0
    max_iter: int = 20_000
    tol: float = 1e-6
    l2: float = 0.0

    def __post_init__(self):
        if self.max_iter < 1 or self.tol <= 0 or self.learning_rate <= 0 or self.l2 < 0:
            raise ModelError("invalid logistic parameters")


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def logistic_gradient(weights, X, labels, l2=0.0):
    """Mean gradient of the negative log-likelihood; intercept is weights[-1]."""
    Xb = np.column_stack([X, np.ones(X.shape[0])])
    p = _sigmoid(Xb @ weights)
    grad = Xb.T @ (p - labels) / X.shape[0]
    if l2:
        reg = l2 * weights
        reg[-1] = 0.0
        grad = grad + reg
    return grad


def fit_logistic(data: LabeledData, params: LogisticParams = None, t_c=0.5) -> Classifier:
    """Maximum-likelihood weights by full-batch gradient descent from zero init."""
    if len(data) == 0:
        raise ModelError("cannot fit a logistic model on an empty dataset")
    params = params or LogisticParams()
    X, y = data.features, data.labels.astype(float)
    w = np.zeros(X.shape[1] + 1)
    norm = np.inf
    for _ in range(params.max_iter):
        grad = logistic_gradient(w, X, y, params.l2)
        norm = float(np.linalg.norm(grad))
        if norm < params.tol:
            break
        w = w - params.learning_rate * grad
    else:
        raise ModelError(f"logistic fit did not converge: gradient norm {norm:.3e} after {params.max_iter} iterations")

    def scorer(Xq, w=w):
        return _sigmoid(Xq @ w[:-1] + w[-1])

    serialized = "weights: [" + ", ".join(repr(float(v)) for v in w) + "]"
    return Classifier(scorer=scorer, t_c=t_c, backend="logistic", serialized=serialized)


# -- refit assembly and the mixture conditional -------------------------------


def assemble_refit_set(pre_accepted: LabeledData, pre_rejected_matched: LabeledData, post_recourse: LabeledData) -> LabeledData:
    """Concatenate the three equally sized parts: one third post-recourse rows."""
    sizes = {len(pre_accepted), len(pre_rejected_matched), len(post_recourse)}
    if len(sizes) != 1:
        raise ModelError(f"refit parts must have equal row counts, got {sorted(sizes)}")
    return LabeledData(
        features=np.vstack([pre_accepted.features, pre_rejected_matched.features, post_recourse.features]),
        labels=np.concatenate([pre_accepted.labels, pre_rejected_matched.labels, post_recourse.labels]),
        feature_names=pre_accepted.feature_names,
    )


@dataclass(frozen=True)
class MixtureSpec:
    """Weight of the pre-recourse component in the refit mixture."""

    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ModelError("mixture weight must lie in [0, 1]")


class FiniteLabeledDistribution:
    """Exact finite distribution over (X, L): point weights plus conditionals."""

    def __init__(self, table):
        # table: {x_tuple: (P(X=x), P(L=1 | X=x))}
        self.table = {tuple(float(v) for v in k): (float(w), float(c)) for k, (w, c) in table.items()}
        total = sum(w for w, _ in self.table.values())
        if total <= 0:
            raise ModelError("empty distribution")
        self.total = total

    def weight(self, x):
        return self.table.get(tuple(float(v) for v in x), (0.0, 0.0))[0] / self.total

    def conditional(self, x):
        return self.table.get(tuple(float(v) for v in x), (0.0, 0.0))[1]

    @classmethod
    def from_sample(cls, features, labels):
        features = np.asarray(features, dtype=float)
        labels = np.asarray(labels)
        table = {}
        for i in range(features.shape[0]):
            key = tuple(features[i])
            w, s = table.get(key, (0.0, 0.0))
            table[key] = (w + 1.0, s + float(labels[i]))
        return cls({k: (w, s / w) for k, (w, s) in table.items()})


def mixture_conditional(pre: FiniteLabeledDistribution, post: FiniteLabeledDistribution, spec: MixtureSpec, x) -> float:
    """Exact P(L=1 | X=x) under the alpha-weighted joint of pre and post parts."""
    a = spec.alpha
    wp, wq = pre.weight(x), post.weight(x)
    denom = a * wp + (1.0 - a) * wq
    if denom <= 0.0:
        raise ModelError(f"observation {tuple(x)} lies outside both supports")
    num = a * wp * pre.conditional(x) + (1.0 - a) * wq * post.conditional(x)
    return num / denom


def performatively_valid_on(pre, post, points, t_c=0.5, alphas=None):
    """Grid version of the validity definition: no pre-accepted point may flip.

    Returns (valid, failures) where failures lists (x, alpha, mixture value)
    for every grid alpha at which a point accepted under the pre conditional
    is rejected under the mixture conditional.
    """
    alphas = alphas if alphas is not None else [i / 10 for i in range(11)]
    failures = []
    for x in points:
        if pre.conditional(x) < t_c:
            continue
        for a in alphas:
            val = mixture_conditional(pre, post, MixtureSpec(a), x)
            if val < t_c:
                failures.append((tuple(x), a, val))
    return (not failures), failures
