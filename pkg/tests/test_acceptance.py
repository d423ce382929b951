"""End-to-end acceptance checks, one test per criterion.

Every test prints a single ``ACCEPTANCE <n> PASS|FAIL: ...`` line and then
asserts, so ``pytest -s`` is not needed to see the verdicts.
"""

import contextlib
import hashlib
import math
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.spatial.transform import Rotation
from scipy.stats import f_oneway, multivariate_normal

from annulus.cli import main
from annulus.evaluation import (
    PipelineConfig,
    confusion_metrics,
    permutation_null,
    roc_auc,
    stratified_split,
)
from annulus.features import FEATURE_NAMES, ellipse_perimeter, extract_patient, parse_feature_csv
from annulus.geometry import fit_ellipse, fit_plane, rodrigues_rotation
from annulus.models import RFParams, fit_model, lda_fit, rf_fit
from annulus.selection import mrmr_select
from annulus.synth import default_specs, generate_patient


class Verdict:
    """Collects named checks and prints one line for the criterion."""

    def __init__(self, number: int):
        self.number = number
        self.failed: list[str] = []
        self.notes: list[str] = []

    def check(self, ok, label: str) -> None:
        if not bool(ok):
            self.failed.append(label)

    def note(self, text: str) -> None:
        self.notes.append(text)


@pytest.fixture
def verdict(request, capsys):
    @contextlib.contextmanager
    def run(number: int):
        v = Verdict(number)
        error = None
        try:
            yield v
        except Exception as exc:  # an exception is a failed criterion too
            error = exc
            v.failed.append(f"{type(exc).__name__}: {exc}")
        status = "FAIL" if v.failed else "PASS"
        detail = "; ".join(v.failed if v.failed else v.notes)
        with capsys.disabled():
            print(f"\nACCEPTANCE {number} {status}: {detail}")
        if error is not None:
            raise error
        assert not v.failed, v.failed

    return run


# --- 1. geometry oracles ----------------------------------------------------


def test_criterion_1_geometry(verdict):
    with verdict(1) as v:
        t0 = time.perf_counter()
        rng = np.random.default_rng(1)

        # annulus-sized point sets: six points near an ellipse of 12-42 mm
        # semi-axes, each moved by at most 0.01 mm in a random direction
        worst_normal = 0.0
        for _ in range(500):
            n = rng.normal(size=3)
            n /= np.linalg.norm(n)
            n *= np.sign(n[2]) or 1.0
            u = np.cross(n, rng.normal(size=3))
            u /= np.linalg.norm(u)
            w = np.cross(n, u)
            b = rng.uniform(12, 30)
            a = b * rng.uniform(1.0, 1.4)
            t = np.radians(np.array([90, 270, 200, 20, 160, 340]) + rng.uniform(-10, 10, 6))
            pts = rng.uniform(-100, 100, 3) + np.outer(a * np.cos(t), u) + np.outer(b * np.sin(t), w)
            d = rng.normal(size=pts.shape)
            pts += 0.01 * rng.uniform(0, 1, (6, 1)) * d / np.linalg.norm(d, axis=1, keepdims=True)
            est = fit_plane(pts).normal
            worst_normal = max(worst_normal, float(np.linalg.norm(est - n)))
        v.check(worst_normal < 1e-3, f"plane normal error {worst_normal:.2e} >= 1e-3")

        worst_ellipse = 0.0
        for ratio in np.linspace(1.0, 3.0, 41):
            for _ in range(10):
                b = rng.uniform(5, 40)
                a = ratio * b
                th = math.radians(rng.uniform(-90, 90))
                c = rng.uniform(-50, 50, 2)
                t = np.radians(np.arange(0, 360, 60) + rng.uniform(-15, 15, 6))
                p = np.column_stack([a * np.cos(t), b * np.sin(t)])
                R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
                e = fit_ellipse(p @ R.T + c)
                worst_ellipse = max(worst_ellipse, abs(e.a - a) / a, abs(e.b - b) / b)
        v.check(worst_ellipse < 1e-6, f"ellipse axis relative error {worst_ellipse:.2e} >= 1e-6")

        worst_rot = 0.0
        for _ in range(500):
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            angle = rng.uniform(-360, 360)
            vec = rng.normal(size=(4, 3)) * 10
            K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
            rad = math.radians(angle)
            matrix = np.eye(3) + math.sin(rad) * K + (1 - math.cos(rad)) * K @ K
            oracles = (vec @ matrix.T, Rotation.from_rotvec(axis * rad).apply(vec))
            got = rodrigues_rotation(vec, axis, angle)
            for o in oracles:
                worst_rot = max(worst_rot, float(np.max(np.abs(got - o)) / max(1.0, np.max(np.abs(vec)))))
        v.check(worst_rot < 1e-12, f"rotation error {worst_rot:.2e} >= 1e-12")

        elapsed = time.perf_counter() - t0
        v.check(elapsed < 5.0, f"runtime {elapsed:.1f}s >= 5s")
        v.note(f"normal err {worst_normal:.1e}, ellipse rel err {worst_ellipse:.1e}, "
               f"rotation err {worst_rot:.1e}, {elapsed:.2f}s")


# --- 2. feature census and identities -----------------------------------------

# the twelve features named in the reported selection table
TABLE1_NAMES = [
    "u_mag.P3.CP20-15", "u_mag.P2.CP20-15", "perimeter_CP10", "area_CP10", "height_CP5",
    "perimeter_CP5", "u_mag.P0.CP20-15", "u_x.P5.CP15-10", "u_mag.P1.CP20-15", "a_CP10",
    "b_CP5", "b_CP10",
]


def test_criterion_2_feature_census(verdict):
    with verdict(2) as v:
        v.check(len(FEATURE_NAMES) == 187 and len(set(FEATURE_NAMES)) == 187, "feature count is not 187")
        missing = [n for n in TABLE1_NAMES if n not in FEATURE_NAMES]
        v.check(not missing, f"unresolved names {missing}")

        rng = np.random.default_rng(2)
        base = default_specs()
        idx = {n: i for i, n in enumerate(FEATURE_NAMES)}
        worst = 0.0
        count = 0
        for i in range(1000):
            spec = base[i % 2]
            spec = replace(spec, seed=int(rng.integers(2**31)), noise_mm=float(rng.uniform(0, 2.5)))
            fv = extract_patient(generate_patient(spec, i).landmarks).values
            assert fv.shape == (187,)
            for p in (0, 5, 10, 15, 20, 25):
                a, b = fv[idx[f"a_CP{p}"]], fv[idx[f"b_CP{p}"]]
                e, r = fv[idx[f"eccentricity_CP{p}"]], fv[idx[f"ba_ratio_CP{p}"]]
                worst = max(worst, abs(fv[idx[f"area_CP{p}"]] - math.pi * a * b) / (math.pi * a * b))
                worst = max(worst, abs(e * e + (b / a) ** 2 - 1.0), abs(r - b / a))
            for k in range(6):
                for t in ("CP5-0", "CP10-5", "CP15-10", "CP20-15", "CP25-20"):
                    comps = [fv[idx[f"u_{c}.P{k}.{t}"]] for c in "xyz"]
                    mag = fv[idx[f"u_mag.P{k}.{t}"]]
                    worst = max(worst, abs(mag * mag - sum(c * c for c in comps)) / max(1.0, mag * mag))
            count += 1
        v.check(worst <= 1e-9, f"identity violation {worst:.2e} > 1e-9")
        v.note(f"187 features, {len(TABLE1_NAMES)} reported names resolve, "
               f"identities within {worst:.1e} on {count} patients")


# --- 3. perimeter -------------------------------------------------------------


def test_criterion_3_perimeter(verdict):
    with verdict(3) as v:
        p = ellipse_perimeter(21.6, 19.5)
        dev = abs(p - 129.4) / 129.4
        v.check(dev < 0.02, f"perimeter {p:.3f} deviates {dev:.3%} from 129.4")
        worst = 0.0
        for ratio in np.linspace(1.0, 3.0, 201):
            a, b = 10.0 * ratio, 10.0
            oracle, _ = quad(lambda t: math.hypot(a * math.sin(t), b * math.cos(t)), 0, 2 * math.pi,
                             epsabs=1e-13, epsrel=1e-13, limit=200)
            worst = max(worst, abs(ellipse_perimeter(a, b) - oracle) / oracle)
        v.check(worst < 1e-5, f"quadrature deviation {worst:.2e} >= 1e-5")
        v.note(f"P(21.6, 19.5) = {p:.3f} mm ({dev:.2%} from 129.4); max rel err vs quadrature {worst:.1e}")


# --- 4. MRMR -------------------------------------------------------------------


def greedy_oracle(X, y, k):
    p = X.shape[1]
    F = [f_oneway(X[y == 0, j], X[y == 1, j]).statistic for j in range(p)]
    R = np.abs(np.corrcoef(X.T))
    chosen = []
    for step in range(k):
        best, best_s = None, -np.inf
        for j in range(p):
            if j in chosen:
                continue
            s = F[j] if step == 0 else F[j] / max(np.mean([R[j, c] for c in chosen]), 1e-6)
            if s > best_s:
                best, best_s = j, s
        chosen.append(best)
    return chosen


def test_criterion_4_mrmr(verdict):
    with verdict(4) as v:
        rng = np.random.default_rng(4)
        problems = 0
        for _ in range(100):
            p = int(rng.integers(2, 9))
            y = rng.permutation(np.repeat([0, 1], 20))
            X = rng.normal(size=(40, p)) @ rng.normal(size=(p, p)) + np.outer(y, rng.normal(0, 1, p))
            for k in range(1, p + 1):
                if mrmr_select(X, y, k).indices != greedy_oracle(X, y, k):
                    v.check(False, f"greedy mismatch at p={p}, k={k}")
            problems += 1

        demoted = 0
        for _ in range(100):
            p = int(rng.integers(3, 7))
            y = rng.permutation(np.repeat([0, 1], 25))
            X = rng.normal(size=(50, p)) + np.outer(y, rng.uniform(0, 1.5, p))
            base = mrmr_select(X, y, p)
            first = base.indices[0]
            names = [f"f{j:04d}" for j in range(p)] + ["zdup"]
            sel = mrmr_select(np.column_stack([X, X[:, first]]), y, p + 1, names)
            pos = sel.names.index("zdup")
            # the copy never precedes its original, leaves the earlier picks
            # unchanged, and comes after every feature more relevant than its score
            ok = pos > 0 and sel.indices[:pos] == base.indices[:pos]
            ok = ok and all(sel.names.index(names[j]) < pos
                            for j in range(p) if sel.all_relevance[j] > sel.scores[pos])
            demoted += ok
        v.check(demoted == 100, f"duplicate demoted in only {demoted}/100 trials")
        v.note(f"{problems} problems match the exhaustive oracle for all K; duplicate demoted in {demoted}/100")


# --- 5. LDA and RF --------------------------------------------------------------


def test_criterion_5_lda_and_xor(verdict):
    with verdict(5) as v:
        rng = np.random.default_rng(5)
        worst = 0.0
        for trial in range(5):
            A = rng.normal(size=(2, 2))
            cov = A @ A.T + 0.3 * np.eye(2)
            n0, n1 = int(rng.integers(30, 90)), int(rng.integers(30, 90))
            X = np.vstack([rng.multivariate_normal([0, 0], cov, n0),
                           rng.multivariate_normal(rng.normal(0, 1.5, 2), cov, n1)])
            y = np.repeat([0, 1], [n0, n1])
            model = lda_fit(X, y)
            # independent estimate of the class means and pooled covariance
            m0, m1 = X[y == 0].mean(axis=0), X[y == 1].mean(axis=0)
            S = ((n0 - 1) * np.cov(X[y == 0].T) + (n1 - 1) * np.cov(X[y == 1].T)) / (n0 + n1 - 2)
            S = S + 1e-6 * np.trace(S) / 2 * np.eye(2)  # same tiny ridge as the model
            g = np.stack(np.meshgrid(np.linspace(-5, 5, 51), np.linspace(-5, 5, 51)), -1).reshape(-1, 2)
            l0 = n0 * multivariate_normal(m0, S).pdf(g)
            l1 = n1 * multivariate_normal(m1, S).pdf(g)
            worst = max(worst, float(np.max(np.abs(model.predict_proba(g) - l1 / (l0 + l1)))))
        v.check(worst <= 1e-8, f"posterior deviation {worst:.2e} > 1e-8")

        centers = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], dtype=float)
        idx = np.arange(400) % 4
        X = centers[idx] + rng.normal(0, 0.15, (400, 2))
        y = np.array([0, 0, 1, 1])[idx]
        rf = rf_fit(X, y, RFParams(100), seed=5)
        rf_acc = float(np.mean(rf.predict(X)[0] == y))
        lda = fit_model("lda", X, y, ["x0", "x1"])
        lda_acc = float(np.mean(lda.predict(X, ["x0", "x1"])[0] == y))
        v.check(rf_acc >= 0.9, f"RF XOR train accuracy {rf_acc:.3f} < 0.9")
        v.check(lda_acc <= 0.6, f"LDA XOR train accuracy {lda_acc:.3f} > 0.6")
        v.note(f"max posterior deviation {worst:.1e}; XOR train accuracy RF {rf_acc:.3f}, LDA {lda_acc:.3f}")


# --- 6 and 8. end-to-end synthetic runs -----------------------------------------


def _digest(directory: Path) -> dict[str, str]:
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(directory.iterdir()) if p.is_file()}


@pytest.fixture(scope="module")
def end_to_end(tmp_path_factory):
    root = tmp_path_factory.mktemp("e2e")
    t0 = time.perf_counter()
    codes = [
        main(["synth", "--n-per-class", "100", "--noise-mm", "1.0", "--seed", "42", "--out-dir", str(root / "data")]),
        main(["extract", "--landmarks", str(root / "data" / "landmarks.json"), "--out", str(root / "features.csv")]),
        main(["evaluate", "--features", str(root / "features.csv"), "--grid", "desk", "--seed", "42",
              "--jobs", "1", "--out-dir", str(root / "run1")]),
    ]
    elapsed = time.perf_counter() - t0
    return root, codes, elapsed


def test_criterion_6_end_to_end(verdict, end_to_end):
    root, codes, elapsed = end_to_end
    with verdict(6) as v:
        v.check(codes == [0, 0, 0], f"CLI exit codes {codes}")
        metrics = (root / "run1" / "metrics.csv").read_text().splitlines()
        rows = {ln.split(",")[0]: ln.split(",") for ln in metrics if not ln.startswith("#")}
        header = rows.pop("model")
        acc = header.index("accuracy")
        lda_cv = float(rows["LDA (Validation set)"][acc])
        rf_cv = float(rows["RF (Validation set)"][acc])
        v.check(lda_cv >= 0.80, f"LDA CV accuracy {lda_cv:.3f} < 0.80")
        v.check(rf_cv >= 0.80, f"RF CV accuracy {rf_cv:.3f} < 0.80")
        for name in ("table2.txt", "table1.csv", "fig_lda_scatter.svg", "fig_mean_std.svg"):
            v.check((root / "run1" / name).is_file(), f"missing {name}")

        t0 = time.perf_counter()
        table = parse_feature_csv((root / "features.csv").read_text())
        null = permutation_null(table.X, table.labels, table.names,
                                PipelineConfig(grid="none", seed=42), seeds=range(10))
        null_mean = float(np.mean(null))
        total = elapsed + time.perf_counter() - t0
        v.check(0.40 <= null_mean <= 0.60, f"permutation null {null_mean:.3f} outside [0.40, 0.60]")
        v.check(total < 120, f"runtime {total:.0f}s >= 120s")
        v.note(f"CV accuracy LDA {lda_cv:.3f}, RF {rf_cv:.3f}; permutation null {null_mean:.3f} "
               f"over 10 seeds; {total:.0f}s")


# --- 7. split fidelity ----------------------------------------------------------


def test_criterion_7_split_sizes(verdict):
    with verdict(7) as v:
        y = np.repeat([0, 1], [98, 89])
        seen = set()
        for seed in range(20):
            plan = stratified_split(y, holdout_per_class=10, folds=5, seed=seed)
            v.check(len(plan.holdout) == 20, "holdout is not 10 per class")
            v.check(np.bincount(y[plan.holdout]).tolist() == [10, 10], "holdout not stratified")
            sizes = [(len(tr), len(va)) for tr, va in plan.folds]
            v.check(all(tr + va == 167 for tr, va in sizes), f"fold sizes {sizes} do not cover 167 cases")
            seen.update(sizes)
        v.check((134, 33) in seen, f"no fold with 134 training / 33 validation cases: {sorted(seen)}")
        v.note(f"train/validation sizes {sorted(seen)}")


# --- 8. determinism ---------------------------------------------------------------


def test_criterion_8_determinism(verdict, end_to_end):
    root, codes, _ = end_to_end
    with verdict(8) as v:
        v.check(codes == [0, 0, 0], f"CLI exit codes {codes}")
        main(["synth", "--n-per-class", "100", "--seed", "42", "--out-dir", str(root / "data2")])
        main(["extract", "--landmarks", str(root / "data2" / "landmarks.json"), "--out", str(root / "features2.csv")])
        v.check((root / "features.csv").read_bytes() == (root / "features2.csv").read_bytes(),
                "feature CSVs differ between runs")
        rc = main(["evaluate", "--features", str(root / "features2.csv"), "--grid", "desk", "--seed", "42",
                   "--jobs", "4", "--out-dir", str(root / "run2")])
        v.check(rc == 0, f"evaluate exit code {rc}")
        first, second = _digest(root / "run1"), _digest(root / "run2")
        v.check(first.keys() == second.keys(), "artifact sets differ")
        differing = [n for n in first if first[n] != second.get(n)]
        v.check(not differing, f"artifacts differ across thread counts: {differing}")
        v.note(f"{len(first)} artifacts bitwise identical across --jobs 1 and 4 and repeated extraction")


# --- 9. metrics arithmetic ---------------------------------------------------------


def pair_counting_auc(y, s):
    pos, neg = s[y == 1], s[y == 0]
    wins = sum((p > n) + 0.5 * (p == n) for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def test_criterion_9_metrics(verdict):
    with verdict(9) as v:
        y_true = np.array([1] * 7 + [0] * 7 + [0] * 3 + [1] * 3)
        y_pred = np.array([1] * 7 + [0] * 7 + [1] * 3 + [0] * 3)
        m = confusion_metrics(y_true, y_pred)
        v.check(all(m[k] == 0.7 for k in ("accuracy", "specificity", "sensitivity", "f1")), f"metrics {m}")

        rng = np.random.default_rng(9)
        worst = 0.0
        for i in range(1000):
            y = rng.permutation(np.r_[[0, 1], rng.integers(0, 2, 18)])
            s = rng.normal(size=20) if i % 2 else rng.integers(0, 5, 20).astype(float)  # half with ties
            worst = max(worst, abs(roc_auc(y, s) - pair_counting_auc(y, s)))
        v.check(worst <= 1e-12, f"AUC deviation {worst:.2e} > 1e-12")
        v.note(f"TP=TN=7, FP=FN=3 gives {m}; AUC max deviation {worst:.1e} on 1000 instances")
