import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from annulus.errors import InputError, SchemaError
from annulus.ingest import (
    PHASES,
    POINT_NAMES,
    SCHEMA,
    LandmarkSet,
    ViewGeometry,
    dataset_to_dict,
    dumps_dataset,
    load_dataset,
    parse_dataset,
    pixel_to_patient,
)

AXIAL = ViewGeometry(np.zeros(3), np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), 1.0, 1.0)
OBLIQUE = ViewGeometry(
    np.array([10.0, 20.0, 30.0]), np.array([0.6, 0.8, 0.0]), np.array([-0.8, 0.6, 0.0]), 1.5, 1.5
)


def dicom_affine(origin, row_dir, col_dir, row_spacing, col_spacing):
    """Independent oracle: the DICOM pixel->patient matrix acting on (col, row, 0, 1)."""
    m = np.eye(4)
    m[:3, 0] = np.asarray(row_dir) * col_spacing
    m[:3, 1] = np.asarray(col_dir) * row_spacing
    m[:3, 2] = np.cross(row_dir, col_dir)
    m[:3, 3] = origin
    return m


def test_identity_geometry_maps_origin():
    np.testing.assert_array_equal(pixel_to_patient((0, 0), AXIAL), [0, 0, 0])


def test_axis_aligned_spacing():
    g = ViewGeometry(np.zeros(3), np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), 0.7, 0.7)
    np.testing.assert_allclose(pixel_to_patient((2, 3), g), [2.1, 1.4, 0.0], atol=1e-12)


def test_oblique_matches_affine_oracle():
    m = dicom_affine([10, 20, 30], [0.6, 0.8, 0], [-0.8, 0.6, 0], 1.5, 1.5)
    expected = (m @ np.array([2.0, 4.0, 0.0, 1.0]))[:3]
    got = pixel_to_patient((4, 2), OBLIQUE)
    np.testing.assert_allclose(got, expected, atol=1e-12)
    # frozen oracle value
    np.testing.assert_allclose(got, [7.0, 26.0, 30.0], atol=1e-12)
    np.testing.assert_allclose(OBLIQUE.affine(), m, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(
    st.tuples(st.floats(-500, 500), st.floats(-500, 500)),
    st.tuples(st.floats(-500, 500), st.floats(-500, 500)),
    st.floats(0, 1),
)
def test_pixel_mapping_is_affine(p1, p2, alpha):
    mid = (alpha * p1[0] + (1 - alpha) * p2[0], alpha * p1[1] + (1 - alpha) * p2[1])
    lhs = pixel_to_patient(mid, OBLIQUE)
    rhs = alpha * pixel_to_patient(p1, OBLIQUE) + (1 - alpha) * pixel_to_patient(p2, OBLIQUE)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


def test_column_step_length_is_column_spacing():
    g = ViewGeometry(np.zeros(3), np.array([0.6, 0.8, 0]), np.array([-0.8, 0.6, 0]), 0.9, 1.3)
    step = pixel_to_patient((5, 8), g) - pixel_to_patient((5, 7), g)
    assert np.linalg.norm(step) == pytest.approx(1.3, abs=1e-12)
    step = pixel_to_patient((6, 7), g) - pixel_to_patient((5, 7), g)
    assert np.linalg.norm(step) == pytest.approx(0.9, abs=1e-12)


def test_subpixel_indices_accepted():
    np.testing.assert_allclose(pixel_to_patient((0.25, 0.5), AXIAL), [0.5, 0.25, 0.0])


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(row_dir=[1.0, 0.1, 0]),
        dict(col_dir=[0.6, 0.8, 0]),
        dict(row_spacing=0.0),
        dict(col_spacing=-1.0),
    ],
)
def test_invalid_geometry_rejected(kwargs):
    base = dict(origin=[0, 0, 0], row_dir=[1.0, 0, 0], col_dir=[0, 1.0, 0], row_spacing=1.0, col_spacing=1.0)
    base.update(kwargs)
    with pytest.raises((InputError, SchemaError)):
        ViewGeometry.from_dict(base)


def test_non_finite_pixel_rejected():
    with pytest.raises(InputError):
        pixel_to_patient((np.nan, 1.0), AXIAL)


def _xyz_patient(pid="p1", label=0, skip=None, rng=None):
    rng = rng or np.random.default_rng(0)
    pts = []
    for phase in PHASES:
        for name in POINT_NAMES:
            if (name, phase) == skip:
                continue
            pts.append({"name": name, "phase": phase, "patient_xyz": rng.normal(size=3).tolist()})
    return {"id": pid, "label": label, "points": pts}


def test_load_single_patient(tmp_path):
    path = tmp_path / "d.json"
    path.write_text(json.dumps({"schema": SCHEMA, "patients": [_xyz_patient()]}))
    out = load_dataset(path)
    assert len(out) == 1
    assert out[0].coords.shape == (6, 6, 3)
    assert out[0].patient_id == "p1"


def test_missing_entry_names_point_and_phase():
    doc = {"schema": SCHEMA, "patients": [_xyz_patient(skip=("P3", 15))]}
    with pytest.raises(SchemaError, match="P3/CP15"):
        parse_dataset(doc)


def test_pixel_entries_equal_pointwise_conversion():
    geo = {"origin": [10, 20, 30], "row_dir": [0.6, 0.8, 0], "col_dir": [-0.8, 0.6, 0],
           "row_spacing": 1.5, "col_spacing": 1.5}
    views = {"2ch": ("P0", "P1"), "3ch": ("P2", "P3"), "4ch": ("P4", "P5")}
    rng = np.random.default_rng(3)
    pts, expected = [], {}
    for phase in PHASES:
        for view, names in views.items():
            for name in names:
                r, c = rng.uniform(0, 256, size=2)
                pts.append({"name": name, "phase": phase, "pixel": {"row": r, "col": c, "view": view}})
                expected[(name, phase)] = pixel_to_patient((r, c), OBLIQUE)
    doc = {"schema": SCHEMA, "patients": [
        {"id": "px", "label": 1, "views": [{"view": v, "geometry": geo} for v in views], "points": pts}
    ]}
    ls = parse_dataset(doc)[0]
    for (name, phase), xyz in expected.items():
        np.testing.assert_array_equal(ls.point(name, phase), xyz)


def test_mixed_conventions_rejected():
    p = _xyz_patient()
    p["views"] = [{"view": "2ch", "geometry": {"origin": [0, 0, 0], "row_dir": [1, 0, 0], "col_dir": [0, 1, 0],
                                               "row_spacing": 1, "col_spacing": 1}}]
    p["points"][0] = {"name": "P0", "phase": 0, "pixel": {"row": 1, "col": 1, "view": "2ch"}}
    with pytest.raises(InputError, match="mixes"):
        parse_dataset({"schema": SCHEMA, "patients": [p]})


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.update(schema="other/1"),
        lambda d: d["patients"][0].update(label=2),
        lambda d: d["patients"][0]["points"][0].update(phase=7),
        lambda d: d["patients"][0]["points"][0].update(name="P9"),
        lambda d: d["patients"].append(d["patients"][0]),
    ],
)
def test_schema_violations(mutate):
    doc = {"schema": SCHEMA, "patients": [_xyz_patient()]}
    mutate(doc)
    with pytest.raises(SchemaError):
        parse_dataset(doc)


def test_non_finite_coordinate_rejected():
    p = _xyz_patient()
    p["points"][4]["patient_xyz"] = [0.0, float("nan"), 1.0]
    with pytest.raises((InputError, SchemaError)):
        parse_dataset({"schema": SCHEMA, "patients": [p]})


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_subnormal=True), min_size=108, max_size=108))
def test_serialization_round_trip_is_bit_exact(values):
    ls = LandmarkSet("r", 1, np.array(values).reshape(6, 6, 3))
    back = parse_dataset(json.loads(dumps_dataset([ls])))[0]
    assert back == ls
    assert back.coords.tobytes() == ls.coords.tobytes()


def test_landmark_set_is_read_only():
    ls = parse_dataset({"schema": SCHEMA, "patients": [_xyz_patient()]})[0]
    with pytest.raises(ValueError):
        ls.coords[0, 0, 0] = 1.0
    assert dataset_to_dict([ls])["patients"][0]["id"] == "p1"
