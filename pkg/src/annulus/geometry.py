"""Plane and ellipse fitting, and per-patient co-registration.

Angles are in degrees throughout. All functions are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, InputError
from .ingest import PHASES, POINT_NAMES, LandmarkSet

Z_AXIS = np.array([0.0, 0.0, 1.0])

# ratio of singular values below which a point set counts as collinear
DEGENERATE_RATIO = 1e-9


@dataclass(frozen=True)
class PlaneFit:
    centroid: np.ndarray
    normal: np.ndarray
    rms_residual: float


@dataclass(frozen=True)
class EllipseFit:
    """Ellipse in a 2D plane frame. ``theta`` is the major-axis angle in [-90, 90)."""

    center: np.ndarray
    a: float
    b: float
    theta: float
    residual: float


@dataclass(frozen=True)
class RegisteredPhase:
    phase: int
    points3d: np.ndarray
    plane: PlaneFit
    ellipse: EllipseFit
    signed_distances: np.ndarray


def _as_points(points, dim: int) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise InputError(f"expected an (n, {dim}) array of points, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError("non-finite point coordinate")
    return arr


def orient_normal(normal: np.ndarray) -> np.ndarray:
    """Apply the sign convention: z >= 0, ties broken on y, then x."""
    n = np.asarray(normal, dtype=float)
    for comp in (n[2], n[1], n[0]):
        if abs(comp) > 1e-12:
            return n if comp > 0 else -n
    return n


def fit_plane(points) -> PlaneFit:
    """Least-squares (orthogonal) plane through three or more 3D points via SVD."""
    pts = _as_points(points, 3)
    if len(pts) < 3:
        raise InputError(f"plane fit needs at least 3 points, got {len(pts)}")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    _, s, vt = np.linalg.svd(centered, full_matrices=True)
    s = np.concatenate([s, np.zeros(3 - len(s))])
    if s[0] == 0.0 or s[1] < DEGENERATE_RATIO * s[0]:
        raise DegenerateGeometryError("points are collinear or coincident; plane is undefined")
    normal = vt[2] / np.linalg.norm(vt[2])
    normal = orient_normal(normal)
    dist = centered @ normal
    return PlaneFit(centroid, normal, float(np.sqrt(np.mean(dist**2))))


def rodrigues_rotation(v, axis, angle: float) -> np.ndarray:
    """Rotate ``v`` (a 3-vector or an (n, 3) array) about a unit ``axis`` by ``angle`` degrees."""
    k = np.asarray(axis, dtype=float)
    if k.shape != (3,) or abs(np.linalg.norm(k) - 1.0) > 1e-9:
        raise InputError(f"rotation axis must be a unit 3-vector, got {axis!r}")
    v = np.asarray(v, dtype=float)
    t = math.radians(angle)
    c, s = math.cos(t), math.sin(t)
    return v * c + np.cross(k, v) * s + np.multiply.outer(v @ k, k) * (1.0 - c)


def _align_to_z(normal: np.ndarray) -> tuple[np.ndarray, float] | None:
    """Axis and angle of the minimal rotation taking ``normal`` onto +z.

    Returns None when no rotation is needed (normal already +z or -z).
    """
    n = np.asarray(normal, dtype=float)
    axis = np.cross(n, Z_AXIS)
    sin_t = np.linalg.norm(axis)
    if sin_t <= 1e-12:
        return None
    angle = math.degrees(math.atan2(sin_t, float(n @ Z_AXIS)))
    return axis / sin_t, angle


def project_to_plane(points, plane: PlaneFit) -> tuple[np.ndarray, np.ndarray]:
    """Rotate centroid-subtracted points so ``plane`` maps onto z = 0.

    Returns the in-plane (x, y) coordinates and the signed point-to-plane
    distances measured before the rotation.
    """
    pts = _as_points(points, 3)
    centered = pts - plane.centroid
    dist = centered @ plane.normal
    rot = _align_to_z(plane.normal)
    if rot is not None:
        centered = rodrigues_rotation(centered, *rot)
    return centered[:, :2].copy(), dist


def _conic_to_ellipse(conic: np.ndarray) -> tuple[np.ndarray, float, float, float]:
    A, B, C, D, E, F = conic
    den = B * B - 4 * A * C
    if not den < 0:
        raise DegenerateGeometryError("fitted conic is not an ellipse")
    x0 = (2 * C * D - B * E) / den
    y0 = (2 * A * E - B * D) / den
    f0 = A * x0 * x0 + B * x0 * y0 + C * y0 * y0 + D * x0 + E * y0 + F
    evals, evecs = np.linalg.eigh(np.array([[A, B / 2], [B / 2, C]]))
    if evals[0] < 0:  # both negative, since the discriminant is negative
        evals, f0 = -evals[::-1], -f0
        evecs = evecs[:, ::-1]
    if not f0 < 0:
        raise DegenerateGeometryError("fitted conic is an imaginary ellipse")
    # smaller eigenvalue -> longer axis
    a = math.sqrt(-f0 / evals[0])
    b = math.sqrt(-f0 / evals[1])
    major = evecs[:, 0]
    theta = math.degrees(math.atan2(major[1], major[0]))
    return np.array([x0, y0]), a, b, theta


def wrap_half_turn(angle: float) -> float:
    """Map an axial angle (period 180 degrees) into [-90, 90)."""
    w = (angle + 90.0) % 180.0 - 90.0
    return -90.0 if w >= 90.0 else w


def fit_ellipse(points2d) -> EllipseFit:
    """Direct least-squares ellipse fit with the ellipse constraint 4AC - B^2 = 1.

    Uses the block decomposition of the scatter matrix into quadratic and
    linear parts so the constrained eigenproblem stays well conditioned.
    Points are centred and scaled to unit RMS radius before fitting.

    Raises
    ------
    DegenerateGeometryError
        If the points are collinear or no ellipse solution exists.
    """
    pts = _as_points(points2d, 2)
    if len(pts) < 5:
        raise InputError(f"ellipse fit needs at least 5 points, got {len(pts)}")
    shift = pts.mean(axis=0)
    scale = math.sqrt(np.mean(np.sum((pts - shift) ** 2, axis=1)))
    if scale == 0.0:
        raise DegenerateGeometryError("all points coincide")
    x, y = ((pts - shift) / scale).T

    D1 = np.column_stack([x * x, x * y, y * y])
    D2 = np.column_stack([x, y, np.ones_like(x)])
    S1, S2, S3 = D1.T @ D1, D1.T @ D2, D2.T @ D2
    s3 = np.linalg.svd(S3, compute_uv=False)
    if s3[-1] < DEGENERATE_RATIO * s3[0]:
        raise DegenerateGeometryError("points are collinear; ellipse is undefined")
    T = -np.linalg.solve(S3, S2.T)
    M = S1 + S2 @ T
    # premultiply by the inverse of the constraint matrix [[0,0,2],[0,-1,0],[2,0,0]]
    M = np.vstack([M[2] / 2, -M[1], M[0] / 2])
    evals, evecs = np.linalg.eig(M)
    evals, evecs = evals.real, evecs.real
    cond = 4 * evecs[0] * evecs[2] - evecs[1] ** 2
    ok = np.flatnonzero(cond > 0)
    if ok.size == 0:
        raise DegenerateGeometryError("no ellipse-constrained solution")
    pick = ok[np.argmin(np.abs(evals[ok]))]
    a1 = evecs[:, pick]
    conic = np.concatenate([a1, T @ a1])

    center, a, b, theta = _conic_to_ellipse(conic)
    center = center * scale + shift
    a, b = a * scale, b * scale
    if b > a:
        a, b, theta = b, a, theta + 90.0
    if not (math.isfinite(a) and math.isfinite(b) and b > 0):
        raise DegenerateGeometryError("ellipse axes are not finite and positive")
    theta = 0.0 if a - b <= 1e-12 * a else wrap_half_turn(theta)
    return EllipseFit(center, a, b, theta, _sampson_rms(pts, center, a, b, theta))


def _sampson_rms(pts: np.ndarray, center, a: float, b: float, theta: float) -> float:
    """RMS of the first-order (Sampson) geometric distance to the ellipse."""
    t = math.radians(theta)
    c, s = math.cos(t), math.sin(t)
    d = pts - center
    u = d[:, 0] * c + d[:, 1] * s
    v = -d[:, 0] * s + d[:, 1] * c
    # q = (u/a)^2 + (v/b)^2 - 1 scaled to length units
    q = (u / a) ** 2 + (v / b) ** 2 - 1.0
    grad = 2.0 * np.hypot(u / a**2, v / b**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        dist = np.where(grad > 0, q / grad, 0.0)
    return float(np.sqrt(np.mean(dist**2)))


def fit_phase(points3d: np.ndarray) -> tuple[PlaneFit, EllipseFit, np.ndarray]:
    plane = fit_plane(points3d)
    xy, dist = project_to_plane(points3d, plane)
    return plane, fit_ellipse(xy), dist


def _rotate_about_z(points: np.ndarray, angle: float) -> np.ndarray:
    return rodrigues_rotation(points, Z_AXIS, angle)


def registration_transform(phase0: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rigid transform (R, t) with x -> R @ x + t built from the phase-0 points.

    The phase-0 centroid goes to the origin, the phase-0 plane normal to +z
    and the phase-0 ellipse major axis to the x-axis. Two sign ambiguities
    remain (normal sign, major-axis direction); they are settled from the
    labelled points so the frame does not depend on the scanner pose:

    * +x points from the septal insertions (P2, P4) toward the free-wall
      insertions (P3, P5);
    * +y points from posterior (P1) toward anterior (P0).
    """
    plane = fit_plane(phase0)
    xy, _ = project_to_plane(phase0, plane)
    theta0 = fit_ellipse(xy).theta

    R = np.eye(3)
    rot = _align_to_z(plane.normal)
    if rot is not None:
        R = rodrigues_rotation(R.T, *rot).T
    R = _rotate_about_z(R.T, -theta0).T

    local = (phase0 - plane.centroid) @ R.T
    idx = {name: i for i, name in enumerate(POINT_NAMES)}
    lateral = local[[idx["P3"], idx["P5"]]].mean(axis=0) - local[[idx["P2"], idx["P4"]]].mean(axis=0)
    if lateral[0] < 0:
        R = _rotate_about_z(R.T, 180.0).T
    local = (phase0 - plane.centroid) @ R.T
    anterior = local[idx["P0"]] - local[idx["P1"]]
    if anterior[1] < 0:
        # half turn about x: keeps the major axis on x, flips y and z
        R = np.diag([1.0, -1.0, -1.0]) @ R
    return R, -R @ plane.centroid


def register_patient(landmarks: LandmarkSet) -> list[RegisteredPhase]:
    """Co-register all phases of one patient with one rigid transform fixed at CP0.

    Each phase is then refitted (plane and ellipse) in the registered frame.
    Inter-phase motion is preserved, so displacements stay physical.
    """
    coords = landmarks.coords
    try:
        R, t = registration_transform(coords[0])
    except DegenerateGeometryError as exc:
        raise DegenerateGeometryError(f"patient {landmarks.patient_id} CP0: {exc}") from exc
    out = []
    for i, phase in enumerate(PHASES):
        pts = coords[i] @ R.T + t
        try:
            plane, ellipse, dist = fit_phase(pts)
        except DegenerateGeometryError as exc:
            raise DegenerateGeometryError(
                f"patient {landmarks.patient_id} CP{phase}: {exc}"
            ) from exc
        out.append(RegisteredPhase(phase, pts, plane, ellipse, dist))
    return out
