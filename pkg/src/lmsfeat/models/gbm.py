"""
Gradient-boosted regression trees, grown leaf-wise with exact split search.

Least-squares loss for regression, logistic loss for binary classification.
Each round fits one tree to the loss gradient with Newton leaf values; a
step that would raise the training loss is halved until it does not.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .matrix import FeatureMatrix

_EPS = 1e-12


@dataclass(frozen=True)
class GbmParams:
    n_trees: int = 200
    learning_rate: float = 0.1
    max_leaves: int = 31
    min_samples_leaf: int = 20
    subsample: float = 1.0
    seed: int = 0
    reg_lambda: float = 0.0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be positive")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must be in (0, 1]")
        if self.max_leaves < 2:
            raise ValueError("max_leaves must be >= 2")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if not 0 < self.subsample <= 1:
            raise ValueError("subsample must be in (0, 1]")
        if self.reg_lambda < 0:
            raise ValueError("reg_lambda must be >= 0")


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf node id reached by each row."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=float),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=float),
        )


def _find_split(X, g, h, S, min_leaf, lam) -> tuple[float, int, float, int]:
    """Best (gain, feature, threshold, split position) for one node; gain -inf if none.

    ``S`` holds the node's rows sorted by each feature, one feature per row of
    the array. Ties go to the lower feature index, then the lower threshold.
    """
    p, m = S.shape
    if m < 2 * min_leaf:
        return -np.inf, -1, 0.0, -1
    xs = X[S, np.arange(p)[:, None]]
    G = np.cumsum(g[S], axis=1)
    H = np.cumsum(h[S], axis=1)
    g_tot, h_tot = G[0, -1], H[0, -1]
    GL, HL = G[:, :-1], H[:, :-1]
    GR, HR = g_tot - GL, h_tot - HL
    n_left = np.arange(1, m)
    valid = (xs[:, 1:] > xs[:, :-1]) & (n_left >= min_leaf) & (m - n_left >= min_leaf)
    parent = g_tot**2 / (h_tot + lam + _EPS)
    gain = GL**2 / (HL + lam + _EPS) + GR**2 / (HR + lam + _EPS) - parent
    gain = np.where(valid, gain, -np.inf)
    # row-major argmax prefers the lower feature, then the lower position
    flat = int(np.argmax(gain))
    f, pos = divmod(flat, m - 1)
    best = float(gain[f, pos])
    if not np.isfinite(best) or best <= _EPS:
        return -np.inf, -1, 0.0, -1
    lo, hi = xs[f, pos], xs[f, pos + 1]
    thr = (lo + hi) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return best, f, float(thr), pos


def presort(X, rows) -> np.ndarray:
    """Rows sorted by each feature (stable), one feature per row of the result."""
    return rows[np.argsort(X[rows], axis=0, kind="stable")].T.copy()


def grow_tree(X, g, h, rows, params: GbmParams, root: np.ndarray | None = None) -> tuple[Tree, np.ndarray]:
    """Leaf-wise tree on ``rows``; returns the tree and per-feature split gain.

    ``root`` may pass ``presort(X, rows)`` computed once for repeated calls.
    """
    lam = params.reg_lambda
    p = X.shape[1]
    feature, threshold, left, right, value = [-1], [0.0], [-1], [-1], [0.0]
    gains = np.zeros(p)
    # per-feature sorted row orders; children inherit them by stable partition
    if root is None:
        root = presort(X, rows)
    leaves = {0: root}
    cands = {}
    is_left = np.zeros(X.shape[0], dtype=bool)

    def consider(node, S):
        cands[node] = _find_split(X, g, h, S, params.min_samples_leaf, lam)

    consider(0, root)
    n_leaves = 1
    while n_leaves < params.max_leaves:
        best_node, best_gain = -1, -np.inf
        for node in sorted(cands):
            gain = cands[node][0]
            if gain > best_gain:
                best_node, best_gain = node, gain
        if best_node < 0:
            break
        gain, f, thr, pos = cands.pop(best_node)
        S = leaves.pop(best_node)
        m_left = pos + 1
        is_left[S[f, :m_left]] = True
        mask = is_left[S]
        S_left = S[mask].reshape(p, m_left)
        S_right = S[~mask].reshape(p, S.shape[1] - m_left)
        is_left[S[f, :m_left]] = False
        li, ri = len(feature), len(feature) + 1
        for _ in range(2):
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
        feature[best_node], threshold[best_node] = f, thr
        left[best_node], right[best_node] = li, ri
        gains[f] += gain
        leaves[li], leaves[ri] = S_left, S_right
        consider(li, S_left)
        consider(ri, S_right)
        n_leaves += 1

    for node, S in leaves.items():
        node_rows = S[0]
        value[node] = -g[node_rows].sum() / (h[node_rows].sum() + lam + _EPS)
    tree = Tree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=float),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(value, dtype=float),
    )
    return tree, gains


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _loss(task, y, raw) -> float:
    if task == "regression":
        return float(np.mean((y - raw) ** 2))
    # mean logistic loss, log(1 + e^z) - y z
    return float(np.mean(np.logaddexp(0.0, raw) - y * raw))


def _grad_hess(task, y, raw):
    if task == "regression":
        return raw - y, np.ones_like(y)
    p = _sigmoid(raw)
    return p - y, p * (1.0 - p)


@dataclass
class GbmModel:
    task: str
    columns: list[str]
    init: float
    trees: list[Tree]
    params: GbmParams
    medians: dict[str, float] = field(default_factory=dict)
    loss_trace: list[float] = field(default_factory=list)
    feature_gain: np.ndarray | None = None
    family: str = "gbm"

    def raw(self, X: np.ndarray) -> np.ndarray:
        out = np.full(X.shape[0], self.init, dtype=float)
        for t in self.trees:
            out += t.predict(X)
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} feature columns, got shape {X.shape}")
        raw = self.raw(X)
        return _sigmoid(raw) if self.task == "classification" else raw

    def importance(self) -> dict[str, float]:
        gain = self.feature_gain if self.feature_gain is not None else np.zeros(len(self.columns))
        return dict(zip(self.columns, map(float, gain)))

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "task": self.task,
            "columns": list(self.columns),
            "medians": dict(self.medians),
            "params": asdict(self.params),
            "init": self.init,
            "trees": [t.to_dict() for t in self.trees],
            "loss_trace": list(self.loss_trace),
            "feature_gain": [] if self.feature_gain is None else self.feature_gain.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GbmModel":
        return cls(
            task=d["task"],
            columns=list(d["columns"]),
            init=float(d["init"]),
            trees=[Tree.from_dict(t) for t in d["trees"]],
            params=GbmParams(**d["params"]),
            medians={k: float(v) for k, v in d["medians"].items()},
            loss_trace=list(d.get("loss_trace", [])),
            feature_gain=np.asarray(d["feature_gain"], dtype=float) if d.get("feature_gain") else None,
        )


def check_labels(task: str, y: np.ndarray) -> None:
    if y.size == 0:
        raise ValueError("training set is empty")
    if task == "classification":
        if not np.isin(y, (0.0, 1.0)).all():
            raise ValueError("classification labels must be 0 or 1")
        if np.unique(y).size < 2:
            raise ValueError("classification outcome has a single class")
    elif task != "regression":
        raise ValueError(f"unknown task {task!r}")


def train_gbm(train: FeatureMatrix, params: GbmParams = GbmParams(), task: str | None = None) -> GbmModel:
    task = task or train.task
    X = np.asarray(train.X, dtype=float)
    y = np.asarray(train.y, dtype=float)
    check_labels(task, y)
    n = y.size
    if task == "regression":
        # shifted mean: exact for a constant target
        init = float(y[0] + (y - y[0]).mean())
    else:
        p = y.mean()
        init = float(np.log(p / (1.0 - p)))

    rng = np.random.default_rng(params.seed)
    raw = np.full(n, init)
    loss = _loss(task, y, raw)
    trace = [loss]
    trees = []
    gains = np.zeros(X.shape[1])
    all_rows = np.arange(n)
    n_sub = max(1, int(round(params.subsample * n)))
    full = presort(X, all_rows) if n_sub == n else None
    for _ in range(params.n_trees):
        g, h = _grad_hess(task, y, raw)
        rows = all_rows if n_sub == n else np.sort(rng.choice(n, n_sub, replace=False))
        tree, tree_gain = grow_tree(X, g, h, rows, params, full)
        tree.value *= params.learning_rate
        step = tree.predict(X)
        new_loss = _loss(task, y, raw + step)
        halvings = 0
        while new_loss > loss and halvings < 50:
            tree.value *= 0.5
            step *= 0.5
            new_loss = _loss(task, y, raw + step)
            halvings += 1
        if new_loss > loss:
            tree.value[:] = 0.0
            step[:] = 0.0
            new_loss = loss
        raw = raw + step
        loss = new_loss
        trace.append(loss)
        trees.append(tree)
        gains += tree_gain
    return GbmModel(task, list(train.columns), init, trees, params, dict(train.medians), trace, gains)
