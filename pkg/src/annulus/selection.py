"""Minimum-redundancy maximum-relevance feature ranking.

Relevance is the two-group ANOVA F statistic, redundancy the mean absolute
Pearson correlation with the features already chosen, and the two are
combined as a quotient (F / redundancy), which keeps the ranking invariant
to positive rescaling of any column.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError, InputError
from .features import canonical_order

TINY = 1e-12
REDUNDANCY_FLOOR = 1e-6
DEFAULT_K = 25
K_SWEEP = (5, 10, 25, 50)


def _binary_labels(y) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise InputError("labels must be a 1-D vector")
    if not np.all((y == 0) | (y == 1)):
        raise InputError("labels must be 0/1")
    if y.min() == y.max():
        raise DataError("both classes must be present")
    return y.astype(int)


def f_statistic(x, y) -> float:
    """One-way ANOVA F for two groups.

    Returns ``inf`` when the groups have zero spread but different means, and
    0 when there is no variation at all.
    """
    x = np.asarray(x, dtype=float)
    y = _binary_labels(y)
    if x.shape != y.shape:
        raise InputError(f"length mismatch: {x.shape} vs {y.shape}")
    n = len(x)
    if n < 3:
        raise InputError("F statistic needs at least 3 samples")
    grand = x.mean()
    ss_between = ss_within = 0.0
    for g in (0, 1):
        xg = x[y == g]
        m = xg.mean()
        ss_between += len(xg) * (m - grand) ** 2
        ss_within += float(np.sum((xg - m) ** 2))
    ms_between = ss_between / 1.0
    ms_within = ss_within / (n - 2)
    if ms_within < TINY:
        return float("inf") if ms_between >= TINY else 0.0
    return float(ms_between / ms_within)


def f_statistics(X, y) -> np.ndarray:
    """Column-wise :func:`f_statistic` for an (n, p) matrix."""
    X = np.asarray(X, dtype=float)
    return np.array([f_statistic(X[:, j], y) for j in range(X.shape[1])])


def pearson(x, y) -> float:
    """Pearson correlation; 0 when either input has zero variance."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise InputError(f"length mismatch: {x.shape} vs {y.shape}")
    if len(x) < 2:
        raise InputError("correlation needs at least 2 samples")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx <= 0.0 or syy <= 0.0:
        return 0.0
    r = float(dx @ dy) / np.sqrt(sxx * syy)
    return float(np.clip(r, -1.0, 1.0))


def _abs_corr_with(X: np.ndarray, j: int) -> np.ndarray:
    """|Pearson| between column ``j`` and every column of ``X``."""
    D = X - X.mean(axis=0)
    ss = np.sum(D * D, axis=0)
    num = D.T @ D[:, j]
    den = np.sqrt(ss * ss[j])
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(den > 0, num / den, 0.0)
    return np.minimum(np.abs(r), 1.0)


@dataclass
class SelectionResult:
    names: list[str]
    indices: list[int]
    relevance: list[float]
    scores: list[float]
    all_relevance: np.ndarray = field(repr=False)

    @property
    def k(self) -> int:
        return len(self.names)

    @property
    def ranked(self) -> list[tuple[str, float, float]]:
        return list(zip(self.names, self.relevance, self.scores))

    def to_csv(self, header_lines: Sequence[str] = ()) -> str:
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rank", "feature", "F", "mrmr_score"])
        for r, (name, f, s) in enumerate(self.ranked, start=1):
            w.writerow([r, name, repr(f), repr(s)])
        return buf.getvalue()


def mrmr_select(X, y, k: int = DEFAULT_K, names: Sequence[str] | None = None) -> SelectionResult:
    """Greedy MRMR forward selection of ``k`` columns of ``X``.

    The first pick is the column with the largest F. Every later pick
    maximises ``F_i / max(mean_s |r(x_i, x_s)|, 1e-6)`` over the columns not
    yet chosen. Ties go to the column that comes first in canonical feature
    order (see :func:`annulus.features.canonical_order`), so the result does
    not depend on how the columns are arranged.
    """
    X = np.asarray(X, dtype=float)
    y = _binary_labels(y)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise InputError(f"X must be (n, p) with n = {len(y)}, got {X.shape}")
    p = X.shape[1]
    if names is None:
        names = [f"f{j:04d}" for j in range(p)]
    if len(names) != p:
        raise InputError("names must match the number of columns")
    if not 1 <= k <= p:
        raise InputError(f"k must be between 1 and {p}, got {k}")

    F = f_statistics(X, y)
    rank = np.empty(p, dtype=int)
    rank[canonical_order(list(names))] = np.arange(p)
    remaining = np.ones(p, dtype=bool)
    corr_sum = np.zeros(p)
    chosen: list[int] = []
    scores: list[float] = []
    for step in range(k):
        if step == 0:
            score = F.copy()
        else:
            red = np.maximum(corr_sum / step, REDUNDANCY_FLOOR)
            with np.errstate(invalid="ignore"):
                score = F / red
            score[np.isnan(score)] = 0.0
        score[~remaining] = -np.inf
        best = np.flatnonzero(score == score.max())
        j = int(best[np.argmin(rank[best])])
        chosen.append(j)
        scores.append(float(score[j]))
        remaining[j] = False
        corr_sum += _abs_corr_with(X, j)
    return SelectionResult(
        names=[names[j] for j in chosen],
        indices=chosen,
        relevance=[float(F[j]) for j in chosen],
        scores=scores,
        all_relevance=F,
    )
