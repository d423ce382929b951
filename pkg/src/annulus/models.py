"""Standardization, two-class LDA, CART trees, random forests and model files."""

from __future__ import annotations

import heapq
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError, InputError, NumericalError, SchemaError
from .features import canonical_order

MODEL_SCHEMA = "annulus-model/1"


def _check_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != len(y):
        raise InputError(f"X must be (n, k) and y length n; got {X.shape} and {y.shape}")
    if not np.all((y == 0) | (y == 1)):
        raise InputError("labels must be 0/1")
    if len(np.unique(y)) < 2:
        raise DataError("training data contains a single class")
    return X, y.astype(int)


# --- standardizer ---------------------------------------------------------


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        return cls(X.mean(axis=0), X.std(axis=0))

    @property
    def constant(self) -> np.ndarray:
        return ~(self.std > 0)

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        safe = np.where(self.constant, 1.0, self.std)
        Z = (X - self.mean) / safe
        Z[:, self.constant] = 0.0
        return Z

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Standardizer":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["std"], dtype=float))


# --- LDA ------------------------------------------------------------------


def _sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass
class LdaModel:
    """Shared-covariance Gaussian classifier.

    ``coef`` and ``intercept`` define the log posterior odds of class 1:
    ``log P(1|x)/P(0|x) = coef @ x + intercept``.
    """

    means: np.ndarray
    covariance: np.ndarray
    priors: np.ndarray
    coef: np.ndarray
    intercept: float

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.coef):
            raise InputError(f"expected {len(self.coef)} features, got array of shape {X.shape}")
        # row-wise reduction, so a row's score does not depend on the batch it is in
        return (X * self.coef).sum(axis=1) + self.intercept

    def predict_proba(self, X) -> np.ndarray:
        return _sigmoid(self.decision_function(X))

    def predict(self, X) -> tuple[np.ndarray, np.ndarray]:
        score = self.predict_proba(X)
        return (score > 0.5).astype(int), score

    def to_dict(self) -> dict:
        return {
            "means": self.means.tolist(),
            "covariance": self.covariance.tolist(),
            "priors": self.priors.tolist(),
            "coef": self.coef.tolist(),
            "intercept": self.intercept,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "LdaModel":
        return cls(
            np.asarray(d["means"], dtype=float),
            np.asarray(d["covariance"], dtype=float),
            np.asarray(d["priors"], dtype=float),
            np.asarray(d["coef"], dtype=float),
            float(d["intercept"]),
        )


def lda_fit(X, y) -> LdaModel:
    X, y = _check_xy(X, y)
    n, k = X.shape
    counts = np.bincount(y, minlength=2)
    if counts.min() < 2:
        raise DataError("LDA needs at least 2 samples per class")
    means = np.stack([X[y == c].mean(axis=0) for c in (0, 1)])
    resid = X - means[y]
    cov = resid.T @ resid / (n - 2)
    lam = 1e-6 * np.trace(cov) / k
    cov = cov + lam * np.eye(k)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("pooled covariance is singular after regularization") from exc
    diff = means[1] - means[0]
    coef = np.linalg.solve(chol.T, np.linalg.solve(chol, diff))
    priors = counts / n
    intercept = float(-0.5 * (means[1] + means[0]) @ coef + math.log(priors[1] / priors[0]))
    if not np.all(np.isfinite(coef)):
        raise NumericalError("LDA coefficients are not finite")
    return LdaModel(means, cov, priors, coef, intercept)


def lda_predict(model: LdaModel, X) -> tuple[np.ndarray, np.ndarray]:
    return model.predict(X)


# --- decision trees -------------------------------------------------------


@dataclass(frozen=True)
class RFParams:
    n_estimators: int = 100
    max_features: str = "sqrt"
    max_depth: int | None = None
    max_leaf_nodes: int | None = None

    def n_split_features(self, k: int) -> int:
        if self.max_features == "sqrt":
            m = math.floor(math.sqrt(k))
        elif self.max_features == "log2":
            m = math.floor(math.log2(k)) if k > 0 else 0
        elif self.max_features == "all":
            m = k
        else:
            raise InputError(f"unknown max_features rule {self.max_features!r}")
        return max(1, min(k, m))

    def validate(self) -> "RFParams":
        if self.n_estimators < 1:
            raise InputError("n_estimators must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise InputError("max_depth must be >= 1 or None")
        if self.max_leaf_nodes is not None and self.max_leaf_nodes < 2:
            raise InputError("max_leaf_nodes must be >= 2 or None")
        self.n_split_features(1)
        return self

    def to_dict(self) -> dict:
        return {
            "n_estimators": self.n_estimators,
            "max_features": self.max_features,
            "max_depth": self.max_depth,
            "max_leaf_nodes": self.max_leaf_nodes,
        }

    def label(self) -> str:
        depth = "none" if self.max_depth is None else self.max_depth
        leaves = "none" if self.max_leaf_nodes is None else self.max_leaf_nodes
        return f"n={self.n_estimators} mf={self.max_features} depth={depth} leaves={leaves}"


@dataclass
class Tree:
    """Array-of-nodes binary tree. Leaves have ``feature == -1``.

    ``counts[i]`` holds the (class 0, class 1) bootstrap sample counts that
    reach node ``i``; samples with ``x[feature] <= threshold`` go left.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.intp)
        rows = np.arange(len(X))
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return node
            r, nd = rows[inner], node[inner]
            go_left = X[r, f[inner]] <= self.threshold[nd]
            node[inner] = np.where(go_left, self.left[nd], self.right[nd])

    def leaf_proba(self) -> np.ndarray:
        tot = self.counts.sum(axis=1)
        return self.counts[:, 1] / np.maximum(tot, 1)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.leaf_proba()[self.apply(X)]

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    @property
    def depth(self) -> int:
        depth = np.zeros(len(self.feature), dtype=int)
        for i in range(len(self.feature)):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def impurity_decrease(self, n_features: int) -> np.ndarray:
        """Sum over splits of the weighted Gini decrease, per feature."""
        c = self.counts.astype(float)
        n = c.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            weighted_gini = np.where(n > 0, n - (c**2).sum(axis=1) / n, 0.0)
        out = np.zeros(n_features)
        inner = np.flatnonzero(self.feature >= 0)
        gain = weighted_gini[inner] - weighted_gini[self.left[inner]] - weighted_gini[self.right[inner]]
        np.add.at(out, self.feature[inner], gain)
        return out / n[0]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "counts": self.counts.tolist(),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=np.intp),
            np.asarray(d["threshold"], dtype=float),
            np.asarray(d["left"], dtype=np.intp),
            np.asarray(d["right"], dtype=np.intp),
            np.asarray(d["counts"], dtype=np.int64).reshape(-1, 2),
        )


def _best_split(X: np.ndarray, y: np.ndarray, feats: np.ndarray):
    """Best Gini split of rows (X, y) over columns ``feats``.

    Returns (score, feature, threshold) or None when no column varies.
    ``score`` is sum over children of (n0^2 + n1^2) / n; higher is better.
    Ties go to the lowest column index, then the lowest threshold.
    """
    n = len(y)
    feats = np.sort(feats)
    Xn = X[:, feats]
    order = np.argsort(Xn, axis=0, kind="stable")
    Xs = np.take_along_axis(Xn, order, axis=0)
    valid = Xs[1:] > Xs[:-1]
    if not valid.any():
        return None
    ones = np.cumsum(y[order], axis=0)[:-1].astype(float)
    n_left = np.arange(1, n, dtype=float)[:, None]
    n_right = n - n_left
    zeros = n_left - ones
    r_ones = float(y.sum()) - ones
    r_zeros = n_right - r_ones
    score = (zeros**2 + ones**2) / n_left + (r_zeros**2 + r_ones**2) / n_right
    score = np.where(valid, score, -np.inf)
    flat = int(np.argmax(score.T))
    fi, pos = divmod(flat, n - 1)
    lo, hi = Xs[pos, fi], Xs[pos + 1, fi]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return float(score[pos, fi]), int(feats[fi]), float(thr)


def build_tree(X: np.ndarray, y: np.ndarray, params: RFParams, rng: np.random.Generator) -> Tree:
    """Grow one CART tree on (X, y) with Gini splits and random feature subsets.

    With ``max_leaf_nodes`` the tree grows best-first (largest impurity
    decrease first); otherwise nodes are expanded in creation order.
    """
    n, k = X.shape
    m = params.n_split_features(k)
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    counts: list[tuple[int, int]] = []
    depth_of: list[int] = []
    split_of: dict[int, tuple[int, float, np.ndarray]] = {}
    heap: list[tuple] = []
    limited = params.max_leaf_nodes is not None

    def new_node(rows: np.ndarray, depth: int) -> None:
        node = len(feature)
        yn = y[rows]
        c1 = int(yn.sum())
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append((len(rows) - c1, c1))
        depth_of.append(depth)
        if c1 == 0 or c1 == len(rows) or len(rows) < 2:
            return
        if params.max_depth is not None and depth >= params.max_depth:
            return
        perm = rng.permutation(k)
        found = None
        for start in range(0, k, m):
            found = _best_split(X[rows], yn, perm[start:start + m])
            if found is not None:
                break
        if found is None:
            return
        score, f, thr = found
        parent = (c1**2 + (len(rows) - c1) ** 2) / len(rows)
        split_of[node] = (f, thr, rows)
        key = (-(score - parent), node) if limited else (node,)
        heapq.heappush(heap, key)

    new_node(np.arange(n), 0)
    n_leaves = 1
    while heap:
        if limited and n_leaves >= params.max_leaf_nodes:
            break
        node = heapq.heappop(heap)[-1]
        f, thr, rows = split_of.pop(node)
        go_left = X[rows, f] <= thr
        feature[node], threshold[node] = f, thr
        left[node] = len(feature)
        new_node(rows[go_left], depth_of[node] + 1)
        right[node] = len(feature)
        new_node(rows[~go_left], depth_of[node] + 1)
        n_leaves += 1
    return Tree(
        np.asarray(feature, dtype=np.intp),
        np.asarray(threshold, dtype=float),
        np.asarray(left, dtype=np.intp),
        np.asarray(right, dtype=np.intp),
        np.asarray(counts, dtype=np.int64).reshape(-1, 2),
    )


# --- random forest --------------------------------------------------------


def tree_rng(seed: int, index: int) -> np.random.Generator:
    """Independent random stream for tree ``index``; depends only on (seed, index)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


@dataclass
class ForestModel:
    """Bagged CART ensemble.

    Columns are stored in canonical feature-name order (``feature_names``)
    so the random feature draws do not depend on how the caller orders the
    input columns. ``input_order`` maps fit-time input columns onto that order.
    """

    trees: list[Tree]
    params: RFParams
    seed: int
    feature_names: list[str]
    input_order: list[int] = field(default_factory=list)

    def _arrange(self, X, names: Sequence[str] | None) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise InputError(f"expected {len(self.feature_names)} features, got shape {X.shape}")
        if names is not None:
            pos = {name: i for i, name in enumerate(names)}
            try:
                return X[:, [pos[nm] for nm in self.feature_names]]
            except KeyError as exc:
                raise InputError(f"feature {exc.args[0]!r} missing from input") from exc
        return X[:, self.input_order]

    def predict_proba(self, X, names: Sequence[str] | None = None, n_trees: int | None = None) -> np.ndarray:
        Xc = self._arrange(X, names)
        trees = self.trees if n_trees is None else self.trees[:n_trees]
        return np.mean([t.predict_proba(Xc) for t in trees], axis=0)

    def predict(self, X, names: Sequence[str] | None = None, n_trees: int | None = None):
        score = self.predict_proba(X, names, n_trees)
        return (score > 0.5).astype(int), score

    def feature_importance(self, names: Sequence[str] | None = None) -> np.ndarray:
        return rf_feature_importance(self, names)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "seed": self.seed,
            "feature_names": list(self.feature_names),
            "input_order": list(self.input_order),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ForestModel":
        return cls(
            [Tree.from_dict(t) for t in d["trees"]],
            RFParams(**d["params"]),
            int(d["seed"]),
            list(d["feature_names"]),
            list(d["input_order"]),
        )


def rf_fit(
    X,
    y,
    params: RFParams = RFParams(),
    seed: int = 0,
    names: Sequence[str] | None = None,
    n_jobs: int = 1,
) -> ForestModel:
    """Fit a random forest; the result depends only on the data and ``seed``."""
    X, y = _check_xy(X, y)
    params.validate()
    n, k = X.shape
    names = list(names) if names is not None else [f"f{j:04d}" for j in range(k)]
    if len(names) != k:
        raise InputError("names must match the number of columns")
    order = canonical_order(names)
    Xc = np.ascontiguousarray(X[:, order])

    def grow(i: int) -> Tree:
        rng = tree_rng(seed, i)
        boot = rng.integers(0, n, size=n)
        return build_tree(Xc[boot], y[boot], params, rng)

    if n_jobs == 1:
        trees = [grow(i) for i in range(params.n_estimators)]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(grow, range(params.n_estimators)))
    return ForestModel(trees, params, seed, [names[j] for j in order], order)


def rf_feature_importance(model: ForestModel, names: Sequence[str] | None = None) -> np.ndarray:
    """Mean decrease in Gini impurity, normalized to sum to 1.

    Each tree's importances are normalized before averaging. Returned in the
    fit-time input column order, or in ``names`` order when given. A forest
    without any split gets uniform importances.
    """
    k = len(model.feature_names)
    total = np.zeros(k)
    for t in model.trees:
        imp = t.impurity_decrease(k)
        s = imp.sum()
        if s > 0:
            total += imp / s
    s = total.sum()
    canon = total / s if s > 0 else np.full(k, 1.0 / k)
    if names is not None:
        pos = {name: i for i, name in enumerate(model.feature_names)}
        return canon[[pos[nm] for nm in names]]
    out = np.empty(k)
    out[model.input_order] = canon
    return out


def rf_predict(model: ForestModel, X, names: Sequence[str] | None = None):
    return model.predict(X, names)


# --- grid search ----------------------------------------------------------

GRID_PRESETS: dict[str, dict[str, list]] = {
    "full": {
        "n_estimators": [100, 200, 500],
        "max_features": ["sqrt", "log2"],
        "max_depth": [3, 5, 10, None],
        "max_leaf_nodes": [10, 50, None],
    },
    "desk": {
        "n_estimators": [100],
        "max_features": ["sqrt", "log2"],
        "max_depth": [3, 5, None],
        "max_leaf_nodes": [None],
    },
    "none": {
        "n_estimators": [100],
        "max_features": ["sqrt"],
        "max_depth": [None],
        "max_leaf_nodes": [None],
    },
}


def expand_grid(grid: Mapping[str, Sequence]) -> list[RFParams]:
    keys = ("n_estimators", "max_features", "max_depth", "max_leaf_nodes")
    values = [list(grid.get(key, [getattr(RFParams(), key)])) for key in keys]
    if any(len(v) == 0 for v in values):
        raise InputError("grid dimensions must be non-empty")
    return [RFParams(*combo).validate() for combo in itertools.product(*values)]


def _size_key(p: RFParams) -> tuple:
    inf = math.inf
    return (
        p.n_estimators,
        inf if p.max_depth is None else p.max_depth,
        inf if p.max_leaf_nodes is None else p.max_leaf_nodes,
    )


@dataclass
class GridCell:
    params: RFParams
    fold_scores: list[float]

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_scores))

    @property
    def std(self) -> float:
        return float(np.std(self.fold_scores))


@dataclass
class GridResult:
    best: RFParams
    cells: list[GridCell]

    def to_csv(self) -> str:
        lines = ["n_estimators,max_features,max_depth,max_leaf_nodes,mean_accuracy,std_accuracy"]
        for c in self.cells:
            p = c.params
            lines.append(
                f"{p.n_estimators},{p.max_features},{'' if p.max_depth is None else p.max_depth},"
                f"{'' if p.max_leaf_nodes is None else p.max_leaf_nodes},{c.mean!r},{c.std!r}"
            )
        return "\n".join(lines) + "\n"


def grid_search(
    X,
    y,
    grid: Mapping[str, Sequence] | Sequence[RFParams],
    folds: Sequence[tuple[np.ndarray, np.ndarray]],
    seed: int = 0,
    names: Sequence[str] | None = None,
    fold_columns: Sequence[Sequence[int]] | None = None,
) -> GridResult:
    """Exhaustive random-forest grid search by mean validation accuracy.

    ``fold_columns`` optionally restricts each fold to its own column subset
    (e.g. per-fold feature selection). Ties go to the smaller model: fewer
    trees, then shallower, then fewer leaves, then grid order.

    Forests that differ only in ``n_estimators`` share their leading trees
    (each tree's randomness depends on its index alone), so one forest of the
    largest size is grown per remaining grid coordinate and scored on prefixes.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(int)
    cells = list(grid) if not isinstance(grid, Mapping) else expand_grid(grid)
    if not cells:
        raise InputError("grid is empty")
    if not folds:
        raise InputError("at least one fold is required")
    k = X.shape[1]
    names = list(names) if names is not None else [f"f{j:04d}" for j in range(k)]

    groups: dict[tuple, list[int]] = {}
    for i, p in enumerate(cells):
        groups.setdefault((p.max_features, p.max_depth, p.max_leaf_nodes), []).append(i)

    scores = [[0.0] * len(folds) for _ in cells]
    for fi, (train, val) in enumerate(folds):
        cols = list(range(k)) if fold_columns is None else list(fold_columns[fi])
        Xt, Xv = X[np.ix_(train, cols)], X[np.ix_(val, cols)]
        fold_names = [names[c] for c in cols]
        for (mf, depth, leaves), members in groups.items():
            n_max = max(cells[i].n_estimators for i in members)
            forest = rf_fit(Xt, y[train], RFParams(n_max, mf, depth, leaves), seed, fold_names)
            for i in members:
                pred, _ = forest.predict(Xv, n_trees=cells[i].n_estimators)
                scores[i][fi] = float(np.mean(pred == y[val]))

    result = [GridCell(p, s) for p, s in zip(cells, scores)]
    best_i = min(range(len(cells)), key=lambda i: (-result[i].mean, _size_key(cells[i]), i))
    return GridResult(cells[best_i], result)


# --- trained pipelines and model files ------------------------------------


@dataclass
class TrainedModel:
    """A fitted classifier with the feature subset and scaling it expects."""

    kind: str
    feature_names: list[str]
    estimator: LdaModel | ForestModel
    standardizer: Standardizer | None = None
    meta: dict = field(default_factory=dict)

    def _subset(self, X, names: Sequence[str]) -> np.ndarray:
        pos = {n: i for i, n in enumerate(names)}
        try:
            cols = [pos[n] for n in self.feature_names]
        except KeyError as exc:
            raise InputError(f"feature {exc.args[0]!r} missing from input") from exc
        return np.asarray(X, dtype=float)[:, cols]

    def predict(self, X, names: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
        Xs = self._subset(X, names)
        if self.kind == "lda":
            return self.estimator.predict(self.standardizer.transform(Xs))
        return self.estimator.predict(Xs, self.feature_names)

    def coefficients(self) -> np.ndarray:
        """LDA coefficients or RF importances, in ``feature_names`` order."""
        if self.kind == "lda":
            return self.estimator.coef.copy()
        return rf_feature_importance(self.estimator, self.feature_names)

    def to_dict(self) -> dict:
        return {
            "schema": MODEL_SCHEMA,
            "meta": dict(self.meta),
            "kind": self.kind,
            "feature_names": list(self.feature_names),
            "standardizer": None if self.standardizer is None else self.standardizer.to_dict(),
            self.kind: self.estimator.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "TrainedModel":
        if d.get("schema") != MODEL_SCHEMA:
            raise SchemaError(f"expected schema {MODEL_SCHEMA!r}, found {d.get('schema')!r}")
        kind = d.get("kind")
        try:
            if kind == "lda":
                est: LdaModel | ForestModel = LdaModel.from_dict(d["lda"])
            elif kind == "rf":
                est = ForestModel.from_dict(d["rf"])
            else:
                raise SchemaError(f"unknown model kind {kind!r}")
            std = d.get("standardizer")
            return cls(
                kind,
                list(d["feature_names"]),
                est,
                None if std is None else Standardizer.from_dict(std),
                dict(d.get("meta") or {}),
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed model file: {exc}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":")) + "\n"

    @classmethod
    def loads(cls, text: str) -> "TrainedModel":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"model file is not valid JSON: {exc}") from exc


def fit_model(
    kind: str,
    X,
    y,
    names: Sequence[str],
    rf_params: RFParams = RFParams(),
    seed: int = 0,
    n_jobs: int = 1,
) -> TrainedModel:
    """Fit LDA (on training-standardized features) or RF (on raw features)."""
    X, y = _check_xy(X, y)
    names = list(names)
    if kind == "lda":
        std = Standardizer.fit(X)
        return TrainedModel("lda", names, lda_fit(std.transform(X), y), std)
    if kind == "rf":
        return TrainedModel("rf", names, rf_fit(X, y, rf_params, seed, names, n_jobs))
    raise InputError(f"unknown model kind {kind!r}")

