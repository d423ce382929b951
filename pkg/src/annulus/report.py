"""Report tables, registered-geometry export and SVG figures."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import __version__
from .errors import SchemaError
from .features import feature_series
from .geometry import register_patient
from .ingest import POINT_NAMES, LandmarkSet
from .models import TrainedModel


def config_hash(config: Mapping[str, Any]) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def provenance(seed: int, config: Mapping[str, Any]) -> list[str]:
    """Header lines embedded in every artifact."""
    return [f"tool=annulus {__version__}", f"seed={seed}", f"config={config_hash(config)}"]


def write_atomic(path: str | Path, data: str | bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def selection_table(
    ranked: Sequence[tuple[str, float, float]],
    X: np.ndarray,
    y: np.ndarray,
    names: Sequence[str],
    lda: TrainedModel | None = None,
    rf: TrainedModel | None = None,
    header_lines: Sequence[str] = (),
) -> str:
    """Ranked selected features with relevance, model weights and cohort mean/std.

    ``ranked`` holds (feature, F, mrmr_score) triples in selection order.
    """
    pos = {n: i for i, n in enumerate(names)}
    lda_coef = dict(zip(lda.feature_names, lda.coefficients())) if lda else {}
    rf_imp = dict(zip(rf.feature_names, rf.coefficients())) if rf else {}
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank", "feature", "F", "mrmr_score", "lda_coef", "rf_importance",
                "mean_no_mr", "std_no_mr", "mean_mr", "std_mr"])
    for r, (name, f, s) in enumerate(ranked, start=1):
        col = X[:, pos[name]]
        stats = []
        for c in (0, 1):
            v = col[y == c]
            stats += [repr(float(v.mean())) if len(v) else "", repr(float(v.std(ddof=1))) if len(v) > 1 else ""]
        w.writerow([
            r, name, repr(float(f)), repr(float(s)),
            repr(float(lda_coef[name])) if name in lda_coef else "",
            repr(float(rf_imp[name])) if name in rf_imp else "",
            *stats,
        ])
    return buf.getvalue()


def parse_ranked_csv(text: str) -> list[tuple[str, float, float]]:
    """Read (feature, F, mrmr_score) back from a selection CSV."""
    rows = list(csv.DictReader(ln for ln in text.splitlines() if ln and not ln.startswith("#")))
    try:
        return [(r["feature"], float(r["F"]), float(r["mrmr_score"])) for r in rows]
    except (KeyError, ValueError) as exc:
        raise SchemaError(f"malformed selection file: {exc}") from exc


def parse_metrics_csv(text: str) -> dict[str, dict[str, float]]:
    rows = list(csv.DictReader(ln for ln in text.splitlines() if ln and not ln.startswith("#")))
    try:
        return {r["model"]: {k: float(v) for k, v in r.items() if k != "model"} for r in rows}
    except (KeyError, ValueError) as exc:
        raise SchemaError(f"malformed metrics file: {exc}") from exc


def geometry_csv(landmarks: Sequence[LandmarkSet], header_lines=()) -> str:
    """Registered per-phase geometry: plane, ellipse and point coordinates."""
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    cols = ["patient_id", "label", "phase", "centroid_x", "centroid_y", "centroid_z",
            "normal_x", "normal_y", "normal_z", "plane_rms", "center_u", "center_v",
            "a", "b", "theta", "ellipse_residual"]
    cols += [f"{p}_{c}" for p in POINT_NAMES for c in ("x", "y", "z", "dist")]
    w.writerow(cols)
    for ls in landmarks:
        for rp in register_patient(ls):
            row: list[Any] = [ls.patient_id, ls.label, rp.phase]
            row += rp.plane.centroid.tolist() + rp.plane.normal.tolist() + [rp.plane.rms_residual]
            e = rp.ellipse
            row += e.center.tolist() + [e.a, e.b, e.theta, e.residual]
            for k in range(len(POINT_NAMES)):
                row += rp.points3d[k].tolist() + [float(rp.signed_distances[k])]
            w.writerow([v if isinstance(v, (str, int)) else repr(float(v)) for v in row])
    return buf.getvalue()


# --- figures --------------------------------------------------------------


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "annulus"
    plt.rcParams["svg.fonttype"] = "none"
    return plt


def _svg(fig, header_lines: Sequence[str]) -> str:
    buf = io.StringIO()
    fig.savefig(
        buf,
        format="svg",
        metadata={"Date": None, "Creator": header_lines[0] if header_lines else None,
                  "Description": "; ".join(header_lines)},
    )
    return buf.getvalue()


GREEN, RED = "#2ca02c", "#d62728"


def lda_scatter_svg(lda: TrainedModel, X: np.ndarray, y: np.ndarray, names: Sequence[str],
                    header_lines: Sequence[str] = ()) -> str:
    """Pairs of the top-|coefficient| LDA features with the model's decision line.

    Each panel shows two standardized features; the line is where the
    discriminant is zero with all other features at their training mean.
    """
    plt = _pyplot()
    coef = lda.estimator.coef
    order = np.argsort(-np.abs(coef), kind="stable")
    pairs = [order[i:i + 2] for i in range(0, min(4, len(order) - len(order) % 2), 2)] or [order[:1]]
    pos = {n: i for i, n in enumerate(names)}
    Z = lda.standardizer.transform(X[:, [pos[n] for n in lda.feature_names]])

    fig, axes = plt.subplots(1, len(pairs), figsize=(5 * len(pairs), 4.5), squeeze=False)
    for ax, pair in zip(axes[0], pairs):
        i, j = (pair[0], pair[1]) if len(pair) == 2 else (pair[0], pair[0])
        ax.scatter(Z[y == 0, i], Z[y == 0, j], marker="o", facecolors="none", edgecolors=GREEN, label="No MR")
        ax.scatter(Z[y == 1, i], Z[y == 1, j], marker="x", color=RED, label="MR")
        xs = np.linspace(Z[:, i].min() - 0.5, Z[:, i].max() + 0.5, 50)
        if i != j and abs(coef[j]) > 0:
            ax.plot(xs, -(coef[i] * xs + lda.estimator.intercept) / coef[j], "k--", label="LDA boundary")
            ax.set_ylim(Z[:, j].min() - 0.5, Z[:, j].max() + 0.5)
        ax.set_xlabel(f"{lda.feature_names[i]} (standardized)")
        ax.set_ylabel(f"{lda.feature_names[j]} (standardized)")
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    svg = _svg(fig, header_lines)
    plt.close(fig)
    return svg


def mean_std_svg(features: Sequence[str], X: np.ndarray, y: np.ndarray, names: Sequence[str],
                 header_lines: Sequence[str] = ()) -> str:
    """Cohort mean +/- std of each feature's quantity across the cardiac cycle.

    The phase or transition of the selected feature is boxed.
    """
    plt = _pyplot()
    pos = {n: i for i, n in enumerate(names)}
    fig, axes = plt.subplots(1, max(1, len(features)), figsize=(4.2 * max(1, len(features)), 3.8), squeeze=False)
    for ax, feat in zip(axes[0], features):
        series, at = feature_series(feat)
        cols = [pos[s] for s in series if s in pos]
        ticks = [s.rsplit("CP", 1)[1] for s in series if s in pos]
        xs = np.arange(len(cols))
        for cls, color, label in ((0, GREEN, "No MR"), (1, RED, "MR")):
            v = X[y == cls][:, cols]
            m, s = v.mean(axis=0), v.std(axis=0, ddof=1) if len(v) > 1 else np.zeros(len(cols))
            ax.plot(xs, m, color=color, marker="o", label=label)
            ax.fill_between(xs, m - s, m + s, color=color, alpha=0.2)
        ax.axvspan(at - 0.3, at + 0.3, color="tab:blue", alpha=0.15)
        ax.set_xticks(xs)
        ax.set_xticklabels([f"CP{t}" for t in ticks], rotation=45, fontsize=8)
        ax.set_title(feat, fontsize=9)
        ax.legend(fontsize=8)
    fig.tight_layout()
    svg = _svg(fig, header_lines)
    plt.close(fig)
    return svg
