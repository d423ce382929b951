"""Stratified splitting, cross-validation and classification metrics."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import AnnulusError, DataError, InputError
from .models import GRID_PRESETS, GridResult, RFParams, Standardizer, TrainedModel, fit_model, grid_search
from .selection import DEFAULT_K, mrmr_select

METRICS = ("accuracy", "specificity", "sensitivity", "f1", "auc")
ROW_LABELS = ("LDA (Validation set)", "RF (Validation set)", "LDA (Test set)", "RF (Test set)")


@dataclass(frozen=True)
class SplitPlan:
    holdout: np.ndarray
    folds: list[tuple[np.ndarray, np.ndarray]]
    seed: int

    @property
    def development(self) -> np.ndarray:
        return np.sort(np.concatenate([v for _, v in self.folds]))


def stratified_split(labels, holdout_per_class: int = 10, folds: int = 5, seed: int = 42) -> SplitPlan:
    """Hold out ``holdout_per_class`` cases per class, then deal the rest into folds.

    Each class is shuffled with the seeded generator; after the holdout is
    removed its members are assigned to folds round-robin, continuing the
    rotation from where the previous class stopped so fold sizes differ by
    at most one.
    """
    y = np.asarray(labels)
    if y.ndim != 1 or not np.all((y == 0) | (y == 1)):
        raise InputError("labels must be a 0/1 vector")
    if folds < 2:
        raise InputError("need at least 2 folds")
    if holdout_per_class < 0:
        raise InputError("holdout_per_class must be >= 0")
    rng = np.random.default_rng(seed)
    holdout: list[int] = []
    fold_members: list[list[int]] = [[] for _ in range(folds)]
    slot = 0
    for c in (0, 1):
        idx = np.flatnonzero(y == c)
        if len(idx) < holdout_per_class + folds:
            raise DataError(
                f"class {c} has {len(idx)} samples; need at least {holdout_per_class + folds}"
            )
        idx = rng.permutation(idx)
        holdout += idx[:holdout_per_class].tolist()
        for i in idx[holdout_per_class:]:
            fold_members[slot].append(int(i))
            slot = (slot + 1) % folds
    val_sets = [np.sort(np.asarray(m, dtype=int)) for m in fold_members]
    plan = []
    for i in range(folds):
        train = np.sort(np.concatenate([val_sets[j] for j in range(folds) if j != i]))
        plan.append((train, val_sets[i]))
    return SplitPlan(np.sort(np.asarray(holdout, dtype=int)), plan, seed)


def _div(num: float, den: float) -> float:
    return num / den if den else 0.0


def confusion_metrics(y_true, y_pred) -> dict[str, float]:
    """Accuracy, specificity, sensitivity and F1 with MR (label 1) as positive.

    Undefined ratios (0/0) are reported as 0.
    """
    t = np.asarray(y_true).astype(int)
    p = np.asarray(y_pred).astype(int)
    if t.shape != p.shape:
        raise InputError(f"length mismatch: {t.shape} vs {p.shape}")
    tp = int(np.sum((t == 1) & (p == 1)))
    tn = int(np.sum((t == 0) & (p == 0)))
    fp = int(np.sum((t == 0) & (p == 1)))
    fn = int(np.sum((t == 1) & (p == 0)))
    return {
        "accuracy": _div(tp + tn, len(t)),
        "specificity": _div(tn, tn + fp),
        "sensitivity": _div(tp, tp + fn),
        # 2PR/(P+R) rewritten on counts; avoids rounding in P and R
        "f1": _div(2 * tp, 2 * tp + fp + fn),
    }


def roc_auc(y_true, scores) -> float:
    """Mann-Whitney estimate of ROC AUC; tied scores count one half."""
    t = np.asarray(y_true).astype(int)
    s = np.asarray(scores, dtype=float)
    if t.shape != s.shape:
        raise InputError(f"length mismatch: {t.shape} vs {s.shape}")
    n1 = int(t.sum())
    n0 = len(t) - n1
    if n1 == 0 or n0 == 0:
        raise DataError("ROC AUC needs both classes in y_true")
    ranks = rankdata(s)
    return float((ranks[t == 1].sum() - n1 * (n1 + 1) / 2) / (n1 * n0))


def all_metrics(y_true, y_pred, scores) -> dict[str, float]:
    out = confusion_metrics(y_true, y_pred)
    out["auc"] = roc_auc(y_true, scores)
    return out


# --- cross-validation -----------------------------------------------------


@dataclass(frozen=True)
class PipelineConfig:
    k: int = DEFAULT_K
    folds: int = 5
    holdout_per_class: int = 10
    seed: int = 42
    selection: str = "per-fold"
    grid: str = "full"
    models: tuple[str, ...] = ("lda", "rf")
    n_jobs: int = 1

    def __post_init__(self) -> None:
        if self.selection not in ("per-fold", "global"):
            raise InputError(f"selection must be 'per-fold' or 'global', got {self.selection!r}")
        if self.grid not in GRID_PRESETS:
            raise InputError(f"unknown grid preset {self.grid!r}; choose from {sorted(GRID_PRESETS)}")
        bad = set(self.models) - {"lda", "rf"}
        if bad or not self.models:
            raise InputError(f"models must be a non-empty subset of lda, rf; got {self.models}")

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "folds": self.folds,
            "holdout_per_class": self.holdout_per_class,
            "seed": self.seed,
            "selection": self.selection,
            "grid": self.grid,
            "models": list(self.models),
        }


@dataclass
class FoldFit:
    """What one training split produced; kept for leakage auditing."""

    fold: int
    selected: list[str]
    standardizer_mean: np.ndarray
    models: dict[str, TrainedModel] = field(default_factory=dict)


@dataclass
class MetricsReport:
    rows: dict[str, dict[str, float]]
    fold_scores: dict[str, list[dict[str, float]]]
    fold_fits: list[FoldFit]
    final: dict[str, TrainedModel]
    rf_params: RFParams | None
    grid: GridResult | None
    selection: object
    config: PipelineConfig

    def to_csv(self, header_lines: Sequence[str] = ()) -> str:
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model"] + [c for m in METRICS for c in (m, f"{m}_std")])
        for label, vals in self.rows.items():
            w.writerow([label] + [repr(vals.get(c, 0.0)) for m in METRICS for c in (m, f"{m}_std")])
        return buf.getvalue()

    def to_table(self) -> str:
        return format_table(self.rows)


def format_table(rows: dict[str, dict[str, float]]) -> str:
    """Plain-text metrics table; validation rows show mean±std over folds."""
    head = ["Model", "Accuracy", "Specificity", "Sensitivity", "F1-Score", "AUC"]
    lines = [" | ".join(head)]
    for label, vals in rows.items():
        if "Validation" in label:
            cells = [f"{vals[m]:.2f}±{vals[m + '_std']:.2f}" for m in METRICS]
        else:
            cells = [f"{vals[m]:.2f}" for m in METRICS]
        lines.append(" | ".join([label] + cells))
    return "\n".join(lines) + "\n"


def _select(X, y, names, k):
    return mrmr_select(X, y, min(k, X.shape[1]), names)


def fit_pipeline(
    kind: str,
    X: np.ndarray,
    y: np.ndarray,
    names: Sequence[str],
    k: int,
    rf_params: RFParams,
    seed: int,
    selected: Sequence[str] | None = None,
) -> TrainedModel:
    """Select features (unless given) and fit one model, using only (X, y)."""
    if selected is None:
        selected = _select(X, y, names, k).names
    pos = {n: i for i, n in enumerate(names)}
    cols = [pos[n] for n in selected]
    model = fit_model(kind, X[:, cols], y, list(selected), rf_params, seed)
    return model


def _annotate(exc: AnnulusError, fold: int) -> AnnulusError:
    exc.args = (f"fold {fold}: {exc.args[0] if exc.args else exc}",) + exc.args[1:]
    return exc


def run_cv(X, y, names: Sequence[str], config: PipelineConfig = PipelineConfig(), plan: SplitPlan | None = None) -> MetricsReport:
    """Stratified k-fold CV with a held-out test set, per the configured pipeline.

    For every fold the standardizer, the MRMR ranking and the model are fit
    on that fold's training indices only (unless ``selection='global'``, in
    which case one ranking is computed on all non-holdout cases). The random
    forest hyperparameters come from a grid search over the same folds. The
    final models are refit on all non-holdout cases and scored once on the
    holdout.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(int)
    names = list(names)
    if len(np.unique(y)) < 2:
        raise DataError("evaluation needs both classes")
    if plan is None:
        plan = stratified_split(y, config.holdout_per_class, config.folds, config.seed)
    dev = plan.development
    k = min(config.k, X.shape[1])

    global_sel = None
    if config.selection == "global":
        global_sel = _select(X[dev], y[dev], names, k).names

    def fold_selection(i: int) -> FoldFit:
        train, _ = plan.folds[i]
        try:
            sel = global_sel or _select(X[train], y[train], names, k).names
        except AnnulusError as exc:
            raise _annotate(exc, i) from exc
        return FoldFit(i, list(sel), Standardizer.fit(X[train]).mean)

    with ThreadPoolExecutor(max_workers=max(1, config.n_jobs)) as pool:
        fits = list(pool.map(fold_selection, range(len(plan.folds))))

    rf_params = None
    grid = None
    if "rf" in config.models:
        pos = {n: i for i, n in enumerate(names)}
        grid = grid_search(
            X,
            y,
            GRID_PRESETS[config.grid],
            plan.folds,
            config.seed,
            names,
            [[pos[n] for n in f.selected] for f in fits],
        )
        rf_params = grid.best

    def fold_models(i: int) -> dict[str, dict[str, float]]:
        train, val = plan.folds[i]
        out = {}
        for kind in config.models:
            try:
                m = fit_pipeline(kind, X[train], y[train], names, k, rf_params, config.seed, fits[i].selected)
                pred, score = m.predict(X[val], names)
                out[kind] = all_metrics(y[val], pred, score)
            except AnnulusError as exc:
                raise _annotate(exc, i) from exc
            fits[i].models[kind] = m
        return out

    with ThreadPoolExecutor(max_workers=max(1, config.n_jobs)) as pool:
        per_fold = list(pool.map(fold_models, range(len(plan.folds))))

    rows: dict[str, dict[str, float]] = {}
    fold_scores: dict[str, list[dict[str, float]]] = {}
    for kind in config.models:
        scores = [pf[kind] for pf in per_fold]
        fold_scores[kind] = scores
        row = {}
        for m in METRICS:
            vals = np.array([s[m] for s in scores])
            row[m] = float(vals.mean())
            row[m + "_std"] = float(vals.std())
        rows[f"{kind.upper()} (Validation set)"] = row

    final_sel = _select(X[dev], y[dev], names, k)
    final: dict[str, TrainedModel] = {}
    for kind in config.models:
        m = fit_pipeline(kind, X[dev], y[dev], names, k, rf_params, config.seed, final_sel.names)
        final[kind] = m
        if len(plan.holdout):
            pred, score = m.predict(X[plan.holdout], names)
            test = all_metrics(y[plan.holdout], pred, score)
            rows[f"{kind.upper()} (Test set)"] = {**test, **{f"{mm}_std": 0.0 for mm in METRICS}}
    rows = {label: rows[label] for label in ROW_LABELS if label in rows}
    return MetricsReport(rows, fold_scores, fits, final, rf_params, grid, final_sel, config)


def permutation_null(X, y, names, config: PipelineConfig, seeds: Sequence[int]) -> list[float]:
    """Mean CV accuracy per model after shuffling the labels, one value per seed."""
    y = np.asarray(y).astype(int)
    out = []
    for s in seeds:
        y_perm = np.random.default_rng(s).permutation(y)
        cfg = replace(config, seed=s)
        rep = run_cv(X, y_perm, names, cfg)
        out.append(float(np.mean([rep.rows[f"{m.upper()} (Validation set)"]["accuracy"] for m in cfg.models])))
    return out


def k_sweep(X, y, names, config: PipelineConfig, ks: Sequence[int]) -> dict[int, MetricsReport]:
    """Cross-validate the pipeline for several K (number of MRMR features)."""
    out = {}
    for k in ks:
        cfg = replace(config, k=k)
        out[k] = run_cv(X, y, names, cfg)
    return out
