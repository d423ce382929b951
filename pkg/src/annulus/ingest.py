"""Landmark datasets: pixel-to-patient conversion, parsing and serialization.

A landmark file is a JSON document with schema tag ``annulus-landmarks/1``::

    {
      "schema": "annulus-landmarks/1",
      "patients": [
        {
          "id": "p001",
          "label": 1,
          "views": [
            {"view": "2ch",
             "geometry": {"origin": [..3], "row_dir": [..3], "col_dir": [..3],
                          "row_spacing": 0.7, "col_spacing": 0.7}}
          ],
          "points": [
            {"name": "P0", "phase": 0, "pixel": {"row": 12.5, "col": 40.0, "view": "2ch"}},
            ...
          ]
        },
        {
          "id": "p002",
          "label": 0,
          "points": [
            {"name": "P0", "phase": 0, "patient_xyz": [1.0, 2.0, 3.0]},
            ...
          ]
        }
      ]
    }

Each patient must use a single coordinate convention (all ``pixel`` or all
``patient_xyz``). Coordinates are in mm.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import InputError, SchemaError

SCHEMA = "annulus-landmarks/1"

POINT_NAMES = ("P0", "P1", "P2", "P3", "P4", "P5")
PHASES = (0, 5, 10, 15, 20, 25)
VIEWS = ("2ch", "3ch", "4ch")

# Anatomical meaning of each insertion point and the long-axis view it is read from.
POINT_ANATOMY = {
    "P0": ("mitral anterior", "2ch"),
    "P1": ("mitral posterior", "2ch"),
    "P2": ("mitral septal", "3ch"),
    "P3": ("mitral free wall", "3ch"),
    "P4": ("mitral septal", "4ch"),
    "P5": ("mitral free wall", "4ch"),
}

_UNIT_TOL = 1e-6


def _vec3(value: Any, what: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{what}: expected 3 numbers, got {value!r}") from exc
    if arr.shape != (3,):
        raise InputError(f"{what}: expected 3 numbers, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{what}: non-finite coordinate {arr.tolist()}")
    return arr


@dataclass(frozen=True)
class ViewGeometry:
    """In-plane geometry of one long-axis image, as read from its DICOM header.

    ``row_dir`` is the first ImageOrientationPatient triplet (the direction in
    which the column index grows), ``col_dir`` the second one (direction in
    which the row index grows). ``row_spacing`` is the distance between rows
    and ``col_spacing`` the distance between columns, i.e. PixelSpacing[0]
    and PixelSpacing[1].
    """

    origin: np.ndarray
    row_dir: np.ndarray
    col_dir: np.ndarray
    row_spacing: float
    col_spacing: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "origin", _vec3(self.origin, "origin"))
        object.__setattr__(self, "row_dir", _vec3(self.row_dir, "row_dir"))
        object.__setattr__(self, "col_dir", _vec3(self.col_dir, "col_dir"))
        for name in ("row_spacing", "col_spacing"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value <= 0:
                raise InputError(f"{name} must be a positive finite number, got {value}")
            object.__setattr__(self, name, value)
        for name in ("row_dir", "col_dir"):
            norm = float(np.linalg.norm(getattr(self, name)))
            if abs(norm - 1.0) > _UNIT_TOL:
                raise InputError(f"{name} is not unit length (|v| = {norm:.9g})")
        dot = float(self.row_dir @ self.col_dir)
        if abs(dot) > _UNIT_TOL:
            raise InputError(f"row_dir and col_dir are not orthogonal (dot = {dot:.3g})")
        for arr in (self.origin, self.row_dir, self.col_dir):
            arr.setflags(write=False)

    def affine(self) -> np.ndarray:
        """4x4 matrix mapping (col, row, 0, 1) to homogeneous patient coordinates."""
        m = np.eye(4)
        m[:3, 0] = self.row_dir * self.col_spacing
        m[:3, 1] = self.col_dir * self.row_spacing
        m[:3, 2] = np.cross(self.row_dir, self.col_dir)
        m[:3, 3] = self.origin
        return m

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ViewGeometry":
        try:
            return cls(
                origin=d["origin"],
                row_dir=d["row_dir"],
                col_dir=d["col_dir"],
                row_spacing=d["row_spacing"],
                col_spacing=d["col_spacing"],
            )
        except KeyError as exc:
            raise SchemaError(f"geometry block missing field {exc.args[0]!r}") from exc

    def to_dict(self) -> dict:
        return {
            "origin": self.origin.tolist(),
            "row_dir": self.row_dir.tolist(),
            "col_dir": self.col_dir.tolist(),
            "row_spacing": self.row_spacing,
            "col_spacing": self.col_spacing,
        }


def pixel_to_patient(pixel: Sequence[float], geom: ViewGeometry) -> np.ndarray:
    """Map a (row, col) pixel position to patient coordinates in mm.

    Indices may be fractional. Follows the DICOM convention: moving along a
    row (increasing column index) advances by ``col_spacing`` along
    ``row_dir``.
    """
    if len(pixel) != 2:
        raise InputError(f"pixel must be a (row, col) pair, got {pixel!r}")
    row, col = float(pixel[0]), float(pixel[1])
    if not (math.isfinite(row) and math.isfinite(col)):
        raise InputError(f"non-finite pixel index ({row}, {col})")
    return geom.origin + col * geom.col_spacing * geom.row_dir + row * geom.row_spacing * geom.col_dir


@dataclass(frozen=True)
class LandmarkSet:
    """Six annulus insertion points at six cardiac phases for one patient.

    ``coords`` has shape (6 phases, 6 points, 3) ordered as :data:`PHASES`
    and :data:`POINT_NAMES`. The array is read-only.
    """

    patient_id: str
    label: int
    coords: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        coords = np.array(self.coords, dtype=float)
        if coords.shape != (len(PHASES), len(POINT_NAMES), 3):
            raise InputError(
                f"patient {self.patient_id}: coords must have shape (6, 6, 3), got {coords.shape}"
            )
        if not np.all(np.isfinite(coords)):
            raise InputError(f"patient {self.patient_id}: non-finite landmark coordinate")
        if self.label not in (0, 1):
            raise InputError(f"patient {self.patient_id}: label must be 0 or 1, got {self.label!r}")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "label", int(self.label))

    def point(self, name: str, phase: int) -> np.ndarray:
        return self.coords[PHASES.index(phase), POINT_NAMES.index(name)]

    @property
    def points(self) -> dict[tuple[str, int], np.ndarray]:
        return {
            (name, phase): self.coords[i, j]
            for i, phase in enumerate(PHASES)
            for j, name in enumerate(POINT_NAMES)
        }

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LandmarkSet):
            return NotImplemented
        return (
            self.patient_id == other.patient_id
            and self.label == other.label
            and np.array_equal(self.coords, other.coords)
        )

    def __hash__(self) -> int:
        return hash((self.patient_id, self.label, self.coords.tobytes()))


def _parse_patient(raw: Mapping[str, Any]) -> LandmarkSet:
    try:
        pid = str(raw["id"])
        label = raw["label"]
        raw_points = raw["points"]
    except KeyError as exc:
        raise SchemaError(f"patient entry missing field {exc.args[0]!r}") from exc
    except TypeError as exc:
        raise SchemaError(f"patient entry is not an object: {raw!r}") from exc
    if label not in (0, 1) or isinstance(label, bool):
        raise SchemaError(f"patient {pid}: label must be 0 or 1, got {label!r}")

    views: dict[str, ViewGeometry] = {}
    for v in raw.get("views") or []:
        name = v.get("view")
        if name not in VIEWS:
            raise SchemaError(f"patient {pid}: unknown view {name!r}")
        if "geometry" not in v:
            raise SchemaError(f"patient {pid}: view {name} has no geometry block")
        views[name] = ViewGeometry.from_dict(v["geometry"])

    coords = np.full((len(PHASES), len(POINT_NAMES), 3), np.nan)
    seen: set[tuple[str, int]] = set()
    conventions: set[str] = set()
    for p in raw_points:
        name, phase = p.get("name"), p.get("phase")
        if name not in POINT_NAMES:
            raise SchemaError(f"patient {pid}: unknown point name {name!r}")
        if phase not in PHASES or isinstance(phase, bool):
            raise SchemaError(
                f"patient {pid}: phase {phase!r} for {name} is not one of {list(PHASES)}"
            )
        if (name, phase) in seen:
            raise SchemaError(f"patient {pid}: duplicate entry {name}/CP{phase}")
        seen.add((name, phase))
        where = f"patient {pid} {name}/CP{phase}"
        has_px, has_xyz = "pixel" in p, "patient_xyz" in p
        if has_px == has_xyz:
            raise SchemaError(f"{where}: exactly one of 'pixel' or 'patient_xyz' is required")
        if has_xyz:
            conventions.add("patient_xyz")
            xyz = _vec3(p["patient_xyz"], where)
        else:
            conventions.add("pixel")
            px = p["pixel"]
            view = px.get("view")
            if view not in views:
                raise SchemaError(f"{where}: pixel refers to view {view!r} with no geometry")
            try:
                xyz = pixel_to_patient((px["row"], px["col"]), views[view])
            except KeyError as exc:
                raise SchemaError(f"{where}: pixel missing field {exc.args[0]!r}") from exc
        coords[PHASES.index(phase), POINT_NAMES.index(name)] = xyz
    if len(conventions) > 1:
        raise InputError(f"patient {pid}: mixes pixel and patient_xyz coordinates")

    missing = [
        f"{name}/CP{phase}"
        for phase in PHASES
        for name in POINT_NAMES
        if (name, phase) not in seen
    ]
    if missing:
        raise SchemaError(f"patient {pid}: missing landmarks {', '.join(missing)}")
    return LandmarkSet(pid, int(label), coords)


def parse_dataset(doc: Mapping[str, Any]) -> list[LandmarkSet]:
    """Validate an in-memory landmark document and build landmark sets."""
    if not isinstance(doc, Mapping) or doc.get("schema") != SCHEMA:
        found = doc.get("schema") if isinstance(doc, Mapping) else None
        raise SchemaError(f"expected schema {SCHEMA!r}, found {found!r}")
    patients = doc.get("patients")
    if not isinstance(patients, list):
        raise SchemaError("'patients' must be a list")
    out = [_parse_patient(p) for p in patients]
    ids = [p.patient_id for p in out]
    if len(set(ids)) != len(ids):
        raise SchemaError("duplicate patient ids")
    return out


def iter_patients(doc: Mapping[str, Any]):
    """Yield ``(patient_id, LandmarkSet | exception)`` without stopping at bad patients.

    Used by the CLI so one malformed patient does not abort a batch.
    """
    if not isinstance(doc, Mapping) or doc.get("schema") != SCHEMA:
        found = doc.get("schema") if isinstance(doc, Mapping) else None
        raise SchemaError(f"expected schema {SCHEMA!r}, found {found!r}")
    patients = doc.get("patients")
    if not isinstance(patients, list):
        raise SchemaError("'patients' must be a list")
    for i, raw in enumerate(patients):
        pid = raw.get("id", f"#{i}") if isinstance(raw, Mapping) else f"#{i}"
        try:
            yield str(pid), _parse_patient(raw)
        except (SchemaError, InputError) as exc:
            yield str(pid), exc


def read_document(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})") from exc


def load_dataset(path: str | Path) -> list[LandmarkSet]:
    return parse_dataset(read_document(path))


def dataset_to_dict(landmarks: Iterable[LandmarkSet], meta: Mapping[str, Any] | None = None) -> dict:
    """Serialize landmark sets in ``patient_xyz`` form."""
    doc: dict[str, Any] = {"schema": SCHEMA}
    if meta:
        doc["meta"] = dict(meta)
    doc["patients"] = [
        {
            "id": ls.patient_id,
            "label": ls.label,
            "points": [
                {"name": name, "phase": phase, "patient_xyz": ls.coords[i, j].tolist()}
                for i, phase in enumerate(PHASES)
                for j, name in enumerate(POINT_NAMES)
            ],
        }
        for ls in landmarks
    ]
    return doc


def dumps_dataset(landmarks: Iterable[LandmarkSet], meta: Mapping[str, Any] | None = None) -> str:
    # json writes floats with repr(), which round-trips exactly
    return json.dumps(dataset_to_dict(landmarks, meta), indent=1) + "\n"
