"""The 187 morphological and dynamic annulus features.

Feature names follow a fixed grammar:

* ``<base>_CP<p>`` for per-phase values, e.g. ``perimeter_CP10``;
* ``<base>.CP<p2>-<p1>`` for per-transition plane quantities, e.g. ``d_tilt.CP10-5``;
* ``<base>.P<k>.CP<p2>-<p1>`` for point displacements, e.g. ``u_mag.P3.CP20-15``.

The canonical order is :data:`FEATURE_NAMES`. Plane-normal components are
omitted at CP0, where registration pins the normal to +z.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ExtractionError, InputError, SchemaError
from .geometry import PlaneFit, RegisteredPhase, register_patient, wrap_half_turn
from .ingest import PHASES, POINT_NAMES, LandmarkSet

SHAPE_FEATURES = ("area", "perimeter", "a", "b", "eccentricity", "ba_ratio", "height")
NORMAL_FEATURES = ("normal_x", "normal_y", "normal_z")
DISPLACEMENT_COMPONENTS = ("u_x", "u_y", "u_z", "u_mag")
TRANSITIONS = tuple(zip(PHASES[:-1], PHASES[1:]))


def _transition_tag(prev: int, nxt: int) -> str:
    return f"CP{nxt}-{prev}"


def _canonical_names() -> tuple[str, ...]:
    names = [f"{base}_CP{p}" for base in SHAPE_FEATURES for p in PHASES]
    names += [f"{base}_CP{p}" for base in NORMAL_FEATURES for p in PHASES[1:]]
    names += [f"d_tilt.{_transition_tag(*t)}" for t in TRANSITIONS]
    names += [f"d_theta.{_transition_tag(*t)}" for t in TRANSITIONS]
    names += [
        f"{comp}.{pt}.{_transition_tag(*t)}"
        for comp in DISPLACEMENT_COMPONENTS
        for pt in POINT_NAMES
        for t in TRANSITIONS
    ]
    return tuple(names)


FEATURE_NAMES: tuple[str, ...] = _canonical_names()
N_FEATURES = len(FEATURE_NAMES)
assert N_FEATURES == 187
_FEATURE_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}


def canonical_order(names: Sequence[str]) -> list[int]:
    """Positions of ``names`` sorted by canonical feature order.

    Names outside the canonical list sort after it, alphabetically.
    """
    def key(i: int):
        n = names[i]
        return (0, _FEATURE_INDEX[n], "") if n in _FEATURE_INDEX else (1, 0, n)

    return sorted(range(len(names)), key=key)


def ellipse_perimeter(a: float, b: float) -> float:
    """Ramanujan's second approximation to the ellipse perimeter."""
    if not (a > 0 and b > 0):
        raise InputError(f"ellipse axes must be positive, got a={a}, b={b}")
    if b > a:
        a, b = b, a
    h = ((a - b) / (a + b)) ** 2
    return math.pi * (a + b) * (1 + 3 * h / (10 + math.sqrt(4 - 3 * h)))


def annular_height(signed_distances) -> float:
    d = np.asarray(signed_distances, dtype=float)
    return float(d.max() - d.min())


def tilt(plane: PlaneFit) -> float:
    """Angle between the plane and the horizontal (z = 0) plane, in degrees."""
    c = min(1.0, abs(float(plane.normal[2])))
    return math.degrees(math.acos(c))


def delta_theta(theta_next: float, theta_prev: float) -> float:
    """Change of an axial angle, taking the 180 degree line ambiguity into account."""
    return wrap_half_turn(theta_next - theta_prev)


@dataclass(frozen=True)
class PhaseFeatures:
    area: float
    perimeter: float
    a: float
    b: float
    eccentricity: float
    ba_ratio: float
    height: float
    nx: float
    ny: float
    nz: float

    @classmethod
    def from_phase(cls, rp: RegisteredPhase) -> "PhaseFeatures":
        a, b = rp.ellipse.a, rp.ellipse.b
        ratio = b / a
        return cls(
            area=math.pi * a * b,
            perimeter=ellipse_perimeter(a, b),
            a=a,
            b=b,
            eccentricity=math.sqrt(max(0.0, 1.0 - ratio * ratio)),
            ba_ratio=ratio,
            height=annular_height(rp.signed_distances),
            nx=float(rp.plane.normal[0]),
            ny=float(rp.plane.normal[1]),
            nz=float(rp.plane.normal[2]),
        )

    def shape_values(self) -> tuple[float, ...]:
        return (self.area, self.perimeter, self.a, self.b, self.eccentricity, self.ba_ratio, self.height)


def displacements(phases: Sequence[RegisteredPhase]) -> np.ndarray:
    """Point displacements between consecutive phases.

    Returns an array of shape (6 points, 5 transitions, 4) holding
    (u_x, u_y, u_z, u_mag) in mm.
    """
    if [p.phase for p in phases] != list(PHASES):
        raise InputError("registered phases must be ordered CP0, CP5, ..., CP25")
    pos = np.stack([p.points3d for p in phases])  # (phase, point, xyz)
    delta = np.diff(pos, axis=0).transpose(1, 0, 2)  # (point, transition, xyz)
    mag = np.sqrt(np.sum(delta**2, axis=-1, keepdims=True))
    return np.concatenate([delta, mag], axis=-1)


@dataclass(frozen=True)
class FeatureVector:
    patient_id: str
    label: int
    values: np.ndarray

    names = FEATURE_NAMES

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, self.values.tolist()))

    def __getitem__(self, name: str) -> float:
        return float(self.values[_FEATURE_INDEX[name]])


def assemble_features(
    per_phase: Sequence[PhaseFeatures],
    tilts: Sequence[float],
    thetas: Sequence[float],
    disp: np.ndarray,
) -> np.ndarray:
    """Lay out feature values in canonical order.

    ``per_phase``, ``tilts`` and ``thetas`` are indexed by phase; ``disp`` is
    the (point, transition, component) array from :func:`displacements`.
    """
    vals: list[float] = []
    for j in range(len(SHAPE_FEATURES)):
        vals += [pf.shape_values()[j] for pf in per_phase]
    for attr in ("nx", "ny", "nz"):
        vals += [getattr(pf, attr) for pf in per_phase[1:]]
    vals += [tilts[i + 1] - tilts[i] for i in range(len(TRANSITIONS))]
    vals += [delta_theta(thetas[i + 1], thetas[i]) for i in range(len(TRANSITIONS))]
    vals += disp.transpose(2, 0, 1).ravel().tolist()
    return np.asarray(vals, dtype=float)


def extract_features(phases: Sequence[RegisteredPhase], patient_id: str = "", label: int = 0) -> FeatureVector:
    per_phase = [PhaseFeatures.from_phase(p) for p in phases]
    values = assemble_features(
        per_phase,
        [tilt(p.plane) for p in phases],
        [p.ellipse.theta for p in phases],
        displacements(phases),
    )
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise ExtractionError(
            f"patient {patient_id}: non-finite value for feature {FEATURE_NAMES[bad[0]]}"
        )
    values.setflags(write=False)
    return FeatureVector(patient_id, label, values)


def extract_patient(landmarks: LandmarkSet) -> FeatureVector:
    """Register one patient's landmarks and compute its feature vector."""
    return extract_features(register_patient(landmarks), landmarks.patient_id, landmarks.label)


# --- feature matrix files -------------------------------------------------


@dataclass
class FeatureTable:
    """Feature matrix with patient ids, labels and column names."""

    ids: list[str]
    labels: np.ndarray
    X: np.ndarray
    names: list[str]

    @classmethod
    def from_vectors(cls, vectors: Iterable[FeatureVector]) -> "FeatureTable":
        vectors = list(vectors)
        X = np.array([v.values for v in vectors], dtype=float).reshape(len(vectors), N_FEATURES)
        return cls(
            [v.patient_id for v in vectors],
            np.array([v.label for v in vectors], dtype=int),
            X,
            list(FEATURE_NAMES),
        )

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.names.index(name)]


def format_feature_csv(table: FeatureTable, header_lines: Sequence[str] = (), prefix: str = "") -> str:
    """Render a feature table as CSV; values use shortest round-trip repr."""
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["patient_id", "label"] + [prefix + n for n in table.names])
    for pid, lab, row in zip(table.ids, table.labels, table.X):
        w.writerow([pid, int(lab)] + [repr(float(v)) for v in row])
    return buf.getvalue()


def parse_feature_csv(text: str, prefix: str = "") -> FeatureTable:
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    rows = list(csv.reader(lines))
    if not rows:
        raise SchemaError("feature file is empty")
    header = rows[0]
    if header[:2] != ["patient_id", "label"]:
        raise SchemaError("feature file header must start with patient_id,label")
    names = header[2:]
    if prefix:
        if not all(n.startswith(prefix) for n in names):
            raise SchemaError(f"expected every feature column to start with {prefix!r}")
        names = [n[len(prefix):] for n in names]
    ids, labels, X = [], [], []
    for k, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise SchemaError(f"feature file row {k}: expected {len(header)} fields, got {len(row)}")
        try:
            labels.append(int(row[1]))
            X.append([float(v) for v in row[2:]])
        except ValueError as exc:
            raise SchemaError(f"feature file row {k}: {exc}") from exc
        ids.append(row[0])
    X_arr = np.array(X, dtype=float).reshape(len(ids), len(names))
    return FeatureTable(ids, np.array(labels, dtype=int), X_arr, names)


def feature_series(name: str) -> tuple[list[str], int]:
    """All features sharing ``name``'s base quantity, ordered along the cardiac cycle.

    Returns the series and the position of ``name`` in it, e.g.
    ``height_CP5`` -> (["height_CP0", ..., "height_CP25"], 1).
    """
    if name not in _FEATURE_INDEX:
        raise InputError(f"unknown feature {name!r}")
    if "_CP" in name and "." not in name:
        base = name.rsplit("_CP", 1)[0]
        series = [n for n in FEATURE_NAMES if "." not in n and n.rsplit("_CP", 1)[0] == base]
    else:
        base = name.rsplit(".CP", 1)[0]
        series = [n for n in FEATURE_NAMES if "." in n and n.rsplit(".CP", 1)[0] == base]
    return series, series.index(name)
