"""Command-line entry point: ``annulus <subcommand> ...``.

Exit codes: 0 success, 2 unreadable input or unwritable output, 3 schema
violation, 4 unusable data or arguments, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .errors import AnnulusError, DataError, SchemaError
from .evaluation import PipelineConfig, format_table, k_sweep, run_cv, stratified_split
from .features import FeatureTable, extract_patient, format_feature_csv, parse_feature_csv
from .ingest import dumps_dataset, iter_patients, load_dataset
from .models import GRID_PRESETS, RFParams, TrainedModel, fit_model, grid_search
from .report import (
    config_hash,
    geometry_csv,
    lda_scatter_svg,
    mean_std_svg,
    parse_metrics_csv,
    parse_ranked_csv,
    provenance,
    selection_table,
    write_atomic,
)
from .selection import DEFAULT_K, K_SWEEP, mrmr_select
from .synth import default_specs, generate_cohorts

EXIT_IO = 2


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _load_features(path: str) -> tuple[FeatureTable, str]:
    text = _read(path)
    return parse_feature_csv(text), _digest(text)


def _config(args: argparse.Namespace, **extra: Any) -> dict[str, Any]:
    """Everything that determines a subcommand's output, minus output paths."""
    cfg = {"command": args.command, "version": __version__}
    cfg.update(extra)
    return cfg


def _warn(msg: str) -> None:
    print(f"annulus: {msg}", file=sys.stderr)


# --- subcommands -----------------------------------------------------------


def cmd_extract(args: argparse.Namespace) -> int:
    text = _read(args.landmarks)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{args.landmarks}: not valid JSON ({exc})") from exc
    vectors, status, seen = [], 0, set()
    for pid, item in iter_patients(doc):
        try:
            if isinstance(item, Exception):
                raise item
            if pid in seen:
                raise SchemaError("duplicate patient id")
            seen.add(pid)
            vectors.append(extract_patient(item))
        except AnnulusError as exc:
            _warn(f"patient {pid}: {exc}")
            status = status or exc.exit_code
    table = FeatureTable.from_vectors(vectors)
    cfg = _config(args, landmarks_sha256=_digest(text))
    write_atomic(args.out, format_feature_csv(table, provenance(args.seed, cfg)))
    if status:
        _warn(f"{len(vectors)} patient(s) extracted, some failed")
    return status


def cmd_select(args: argparse.Namespace) -> int:
    table, digest = _load_features(args.features)
    sel = mrmr_select(table.X, table.labels, min(args.k, len(table.names)), table.names)
    cfg = _config(args, features_sha256=digest, k=args.k)
    write_atomic(args.out, sel.to_csv(provenance(args.seed, cfg)))
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    table, digest = _load_features(args.features)
    X, y = table.X, table.labels
    if len(np.unique(y)) < 2:
        raise DataError("training needs both classes")
    sel = mrmr_select(X, y, min(args.k, len(table.names)), table.names)
    cols = sel.indices
    params = RFParams()
    if args.model == "rf" and args.grid != "none":
        plan = stratified_split(y, 0, args.folds, args.seed)
        params = grid_search(X[:, cols], y, GRID_PRESETS[args.grid], plan.folds, args.seed, sel.names).best
    cfg = _config(args, features_sha256=digest, model=args.model, k=args.k, grid=args.grid,
                  folds=args.folds, seed=args.seed)
    model = fit_model(args.model, X[:, cols], y, sel.names, params, args.seed, args.jobs)
    model.meta = {"header": provenance(args.seed, cfg), "rf_params": params.to_dict() if args.model == "rf" else None}
    write_atomic(args.out, model.dumps())
    return 0


def _render(out: Path, manifest: dict, table: FeatureTable, ranked, final: dict[str, TrainedModel],
            rows: dict[str, dict[str, float]]) -> list[str]:
    """Write the human-facing tables and figures; returns the file names."""
    header = manifest["header"]
    X, y, names = table.X, table.labels, table.names
    written = []
    write_atomic(out / "table2.txt", "".join(f"# {h}\n" for h in header) + format_table(rows))
    write_atomic(out / "table1.csv",
                 selection_table(ranked, X, y, names, final.get("lda"), final.get("rf"), header))
    written += ["table2.txt", "table1.csv"]
    if "lda" in final:
        write_atomic(out / "fig_lda_scatter.svg", lda_scatter_svg(final["lda"], X, y, names, header))
        written.append("fig_lda_scatter.svg")
    if "rf" in final:
        imp = final["rf"].coefficients()
        order = np.argsort(-imp, kind="stable")[:4]
        top = [final["rf"].feature_names[i] for i in order]
    else:
        top = [name for name, _, _ in ranked[:4]]
    write_atomic(out / "fig_mean_std.svg", mean_std_svg(top, X, y, names, header))
    written.append("fig_mean_std.svg")
    return written


def cmd_evaluate(args: argparse.Namespace) -> int:
    table, digest = _load_features(args.features)
    models = ("lda", "rf") if args.models == "both" else (args.models,)
    config = PipelineConfig(args.k, args.folds, args.holdout, args.seed, args.selection, args.grid, models, args.jobs)
    cfg = _config(args, features_sha256=digest, **config.to_dict(), k_sweep=args.k_sweep)
    header = provenance(args.seed, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    report = run_cv(table.X, table.labels, table.names, config)
    plan = stratified_split(table.labels, args.holdout, args.folds, args.seed)

    files = {}
    files["features.csv"] = format_feature_csv(table, header)
    files["metrics.csv"] = report.to_csv(header)
    files["selection.csv"] = report.selection.to_csv(header)
    if report.grid is not None:
        files["grid.csv"] = "".join(f"# {h}\n" for h in header) + report.grid.to_csv()
    for kind, model in report.final.items():
        model.meta = {"header": header, "rf_params": report.rf_params.to_dict() if kind == "rf" else None}
        files[f"model_{kind}.json"] = model.dumps()
    folds = {
        "header": header,
        "holdout": [table.ids[i] for i in plan.holdout],
        "folds": [
            {"fold": f.fold, "validation": [table.ids[i] for i in plan.folds[f.fold][1]], "selected": f.selected,
             "scores": {kind: report.fold_scores[kind][f.fold] for kind in models}}
            for f in report.fold_fits
        ],
    }
    files["folds.json"] = json.dumps(folds, indent=1) + "\n"
    if args.k_sweep:
        lines = [f"# {h}" for h in header] + ["k,model,accuracy,accuracy_std,auc,auc_std"]
        for k, rep in k_sweep(table.X, table.labels, table.names, config, K_SWEEP).items():
            for kind in models:
                r = rep.rows[f"{kind.upper()} (Validation set)"]
                lines.append(f"{k},{kind},{r['accuracy']!r},{r['accuracy_std']!r},{r['auc']!r},{r['auc_std']!r}")
        files["k_sweep.csv"] = "\n".join(lines) + "\n"
    for name, text in files.items():
        write_atomic(out / name, text)

    manifest = {"tool": f"annulus {__version__}", "seed": args.seed, "config": cfg,
                "config_hash": config_hash(cfg), "header": header, "models": list(models)}
    rendered = _render(out, manifest, table, report.selection.ranked, report.final, report.rows)
    manifest["files"] = sorted(list(files) + rendered)
    write_atomic(out / "manifest.json", json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    print(report.to_table(), end="")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    specs = default_specs(args.n_per_class, args.noise_mm, args.seed)
    landmarks, truth = generate_cohorts(specs)
    cfg = _config(args, n_per_class=args.n_per_class, noise_mm=args.noise_mm, seed=args.seed)
    header = provenance(args.seed, cfg)
    out = Path(args.out_dir)
    write_atomic(out / "landmarks.json", dumps_dataset(landmarks, {"header": header}))
    write_atomic(out / "ground_truth.csv", format_feature_csv(truth, header, prefix="gt_"))
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    src = Path(args.source)
    try:
        manifest = json.loads(_read(str(src / "manifest.json")))
        header = manifest["header"]
        models = manifest["models"]
    except (json.JSONDecodeError, KeyError) as exc:
        raise SchemaError(f"{src}: malformed manifest ({exc})") from exc
    table = parse_feature_csv(_read(str(src / "features.csv")))
    ranked = parse_ranked_csv(_read(str(src / "selection.csv")))
    rows = parse_metrics_csv(_read(str(src / "metrics.csv")))
    final = {kind: TrainedModel.loads(_read(str(src / f"model_{kind}.json"))) for kind in models}
    _render(src, manifest, table, ranked, final, rows)
    if args.landmarks:
        text = _read(args.landmarks)
        landmarks = load_dataset(args.landmarks)
        cfg = _config(args, landmarks_sha256=_digest(text))
        write_atomic(src / "geometry.csv", geometry_csv(landmarks, provenance(manifest["seed"], cfg)))
    print(format_table(rows), end="")
    return 0


# --- argument parsing -------------------------------------------------------


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _nonneg(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _nonneg_float(text: str) -> float:
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError("must be a finite number >= 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="annulus", description="Mitral annulus morphology pipeline.")
    parser.add_argument("--version", action="version", version=f"annulus {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--seed", type=int, default=42, help="seed for all randomness (default 42)")
        return p

    p = add("extract", "landmarks JSON -> 187-feature CSV")
    p.add_argument("--landmarks", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = add("select", "rank features with MRMR")
    p.add_argument("--features", required=True)
    p.add_argument("--k", type=_positive, default=DEFAULT_K)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select)

    p = add("train", "select features and fit one model on all rows")
    p.add_argument("--features", required=True)
    p.add_argument("--model", choices=("lda", "rf"), required=True)
    p.add_argument("--k", type=_positive, default=DEFAULT_K)
    p.add_argument("--grid", choices=sorted(GRID_PRESETS), default="none",
                   help="random-forest grid preset tuned by CV (default: none)")
    p.add_argument("--folds", type=_positive, default=5)
    p.add_argument("--jobs", type=_positive, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = add("evaluate", "cross-validate and test both classifiers")
    p.add_argument("--features", required=True)
    p.add_argument("--folds", type=_positive, default=5)
    p.add_argument("--holdout", type=_nonneg, default=10, help="test cases held out per class")
    p.add_argument("--selection", choices=("per-fold", "global"), default="per-fold")
    p.add_argument("--k", type=_positive, default=DEFAULT_K)
    p.add_argument("--grid", choices=sorted(GRID_PRESETS), default="full")
    p.add_argument("--models", choices=("lda", "rf", "both"), default="both")
    p.add_argument("--k-sweep", action="store_true", help=f"also cross-validate K in {K_SWEEP}")
    p.add_argument("--jobs", type=_positive, default=1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = add("synth", "generate synthetic No-MR/MR cohorts")
    p.add_argument("--n-per-class", type=_nonneg, default=100)
    p.add_argument("--noise-mm", type=_nonneg_float, default=1.0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = add("report", "re-render tables and figures from an evaluate directory")
    p.add_argument("--from", dest="source", required=True)
    p.add_argument("--landmarks", help="also export registered geometry for these landmarks")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AnnulusError as exc:
        _warn(f"error: {exc}")
        return exc.exit_code
    except OSError as exc:
        _warn(f"error: {exc}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
