"""Synthetic No-MR / MR cohorts with exactly known ground-truth features.

Each patient is an elliptical annulus whose six insertion points sit at
fixed angles on the ellipse, lifted out of plane by a saddle pattern. Per
phase the ellipse is scaled by a contraction profile, tilted, spun in plane
and translated. The translation is solved so that the anchor point (P2 by
default) moves by a sampled displacement vector. A random global pose and
isotropic Gaussian landmark noise are applied last.

The saddle offsets are orthogonal to {1, cos, sin} over the six point
angles, so the least-squares plane of the noiseless points is exactly the
ellipse plane and the annular height equals the sampled height.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import InputError
from .features import FeatureTable, PhaseFeatures, assemble_features, ellipse_perimeter
from .geometry import rodrigues_rotation, wrap_half_turn
from .ingest import PHASES, POINT_NAMES, LandmarkSet

DEFAULT_ANGLES = (90.0, 270.0, 200.0, 20.0, 160.0, 340.0)


class SpecError(InputError):
    """The cohort parameters cannot produce valid patients."""


def _gamma(rng: np.random.Generator, mean: float, std: float) -> float:
    if std <= 0:
        return float(mean)
    shape = (mean / std) ** 2
    return float(rng.gamma(shape, std**2 / mean))


@dataclass(frozen=True)
class CohortSpec:
    """Distributions for one cohort. Lengths in mm, angles in degrees.

    Axis lengths are anchored at CP10 and scaled per phase by ``profile``;
    the height is anchored at CP5 and scaled by ``height_profile``.
    ``a`` is built as ``b`` plus a positive gap so that a > b always holds.
    """

    label: int
    n: int = 100
    b_mean: float = 19.5
    b_std: float = 4.25
    a_mean: float = 21.6
    gap_std: float = 1.0
    min_gap: float = 0.5
    min_b: float = 8.0
    profile: tuple[float, ...] = (1.08, 0.975, 1.0, 0.94, 1.07, 1.08)
    profile_jitter: float = 0.02
    height_mean: float = 5.99
    height_std: float = 3.59
    height_profile: tuple[float, ...] = (0.85, 1.0, 0.95, 0.8, 0.75, 0.8)
    anchor: str = "P2"
    disp_mean: tuple[float, ...] = (4.5, 3.5, 3.0, 3.92, 2.5)
    disp_std: tuple[float, ...] = (2.5, 1.8, 1.8, 2.18, 1.5)
    tilt_std: float = 3.0
    spin_std: float = 3.0
    pose_translation: float = 100.0
    noise_mm: float = 1.0
    angles: tuple[float, ...] = DEFAULT_ANGLES
    seed: int = 42

    def validate(self) -> "CohortSpec":
        if self.label not in (0, 1):
            raise SpecError("label must be 0 or 1")
        if self.n < 0:
            raise SpecError("n must be >= 0")
        for name in ("b_std", "gap_std", "profile_jitter", "height_std", "tilt_std", "spin_std", "noise_mm"):
            if getattr(self, name) < 0:
                raise SpecError(f"{name} must be >= 0")
        if any(s < 0 for s in self.disp_std):
            raise SpecError("disp_std entries must be >= 0")
        if len(self.profile) != 6 or len(self.height_profile) != 6:
            raise SpecError("profiles need one entry per phase")
        if len(self.disp_mean) != 5 or len(self.disp_std) != 5:
            raise SpecError("displacement statistics need one entry per transition")
        if self.a_mean - self.b_mean <= self.min_gap or self.min_gap <= 0:
            raise SpecError("a_mean must exceed b_mean by more than min_gap > 0 so that a > b")
        if self.min_b <= 0 or any(p <= 0 for p in self.profile):
            raise SpecError("axis lengths must stay positive")
        if self.height_mean <= 0 or any(h < 0 for h in self.height_profile) or any(m <= 0 for m in self.disp_mean):
            raise SpecError("heights and displacement means must be positive")
        if self.anchor not in POINT_NAMES:
            raise SpecError(f"unknown anchor point {self.anchor!r}")
        if len(self.angles) != 6:
            raise SpecError("need one angle per point")
        pattern = saddle_pattern(self.angles)
        if pattern is None:
            raise SpecError("point angles admit no saddle pattern orthogonal to the ellipse plane")
        c = np.cos(np.radians(self.angles))
        s = np.sin(np.radians(self.angles))
        idx = {nm: i for i, nm in enumerate(POINT_NAMES)}
        lateral = (c[idx["P3"]] + c[idx["P5"]] - c[idx["P2"]] - c[idx["P4"]]) / 2
        anterior = s[idx["P0"]] - s[idx["P1"]]
        if lateral <= 0.1 or anterior <= 0.1:
            raise SpecError(
                "angles must put P3/P5 lateral (+x) of P2/P4 and P0 anterior (+y) of P1"
            )
        return self


def default_specs(n_per_class: int = 100, noise_mm: float = 1.0, seed: int = 42) -> tuple[CohortSpec, CohortSpec]:
    """Cohorts anchored to the reported No-MR and MR mean values.

    Anchored means: b and a at CP10, height at CP5 and the P2 displacement
    magnitude between CP15 and CP20. Everything else is a modelling choice.
    """
    no_mr = CohortSpec(label=0, n=n_per_class, noise_mm=noise_mm, seed=seed)
    mr = replace(
        no_mr,
        label=1,
        b_mean=21.9,
        b_std=5.73,
        a_mean=24.1,
        gap_std=1.45,
        profile=(1.02, 1.037, 1.0, 1.0, 1.01, 1.02),
        height_mean=9.00,
        height_std=6.64,
        disp_mean=(3.5, 2.0, 1.8, 2.70, 1.5),
        disp_std=(1.8, 1.2, 1.2, 1.67, 1.0),
    )
    return no_mr.validate(), mr.validate()


def saddle_pattern(angles: Sequence[float]) -> np.ndarray | None:
    """Unit-height out-of-plane pattern alternating in angular order.

    The alternating sign vector is projected onto the orthogonal complement
    of span{1, cos, sin} and rescaled so that max - min = 1.
    """
    t = np.radians(np.asarray(angles, dtype=float))
    order = np.argsort(np.mod(t, 2 * np.pi), kind="stable")
    sign = np.empty(len(t))
    sign[order] = [1.0 if i % 2 == 0 else -1.0 for i in range(len(t))]
    basis = np.column_stack([np.ones_like(t), np.cos(t), np.sin(t)])
    q, _ = np.linalg.qr(basis)
    resid = sign - q @ (q.T @ sign)
    span = resid.max() - resid.min()
    if span < 1e-6:
        return None
    return resid / span


@dataclass
class SyntheticPatient:
    landmarks: LandmarkSet
    truth: np.ndarray
    clean: np.ndarray = field(repr=False)


def _rotation(tilt_deg: float, azimuth_deg: float, spin_deg: float) -> np.ndarray:
    """Spin about z, then the minimal rotation tilting +z by ``tilt_deg``."""
    az = math.radians(azimuth_deg)
    axis = np.array([math.cos(az), math.sin(az), 0.0])
    spin = rodrigues_rotation(np.eye(3), np.array([0.0, 0.0, 1.0]), spin_deg).T
    return rodrigues_rotation(spin.T, axis, tilt_deg).T


def generate_patient(spec: CohortSpec, index: int) -> SyntheticPatient:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=spec.seed, spawn_key=(spec.label, index)))
    t = np.radians(np.asarray(spec.angles))
    pattern = saddle_pattern(spec.angles)

    b10 = max(spec.min_b, float(rng.normal(spec.b_mean, spec.b_std)))
    a10 = b10 + spec.min_gap + _gamma(rng, spec.a_mean - spec.b_mean - spec.min_gap, spec.gap_std)
    scale = np.array(spec.profile, dtype=float)
    jitter = rng.normal(0.0, spec.profile_jitter, size=6)
    jitter[PHASES.index(10)] = 0.0
    scale = scale * (1.0 + jitter)
    if np.any(scale <= 0):
        raise SpecError("profile jitter produced a non-positive scale")
    a = a10 * scale
    b = b10 * scale

    # resample the height until the SVD plane is guaranteed to be the ellipse plane
    for _ in range(100):
        h5 = _gamma(rng, spec.height_mean, spec.height_std)
        heights = h5 * np.asarray(spec.height_profile) / spec.height_profile[PHASES.index(5)]
        ok = True
        for p in range(6):
            xy = np.column_stack([a[p] * np.cos(t), b[p] * np.sin(t)])
            in_plane = np.linalg.eigvalsh(np.cov(xy.T, bias=True))[0]
            if np.mean((heights[p] * pattern) ** 2) > 0.9 * in_plane:
                ok = False
        if ok:
            break
    else:
        raise SpecError("could not draw a saddle height compatible with the ellipse size")

    tilts = np.zeros(6)
    spins = np.zeros(6)
    rots = [np.eye(3)]
    for p in range(1, 6):
        tilts[p] = float(rng.normal(0.0, spec.tilt_std))
        spins[p] = float(rng.normal(0.0, spec.spin_std))
        rots.append(_rotation(tilts[p], float(rng.uniform(0.0, 360.0)), spins[p]))

    shapes = [np.column_stack([a[p] * np.cos(t), b[p] * np.sin(t), heights[p] * pattern]) for p in range(6)]
    anchor = POINT_NAMES.index(spec.anchor)
    trans = [np.zeros(3)]
    for i in range(5):
        mag = _gamma(rng, spec.disp_mean[i], spec.disp_std[i])
        d = rng.normal(size=3)
        u = mag * d / np.linalg.norm(d)
        drift = rots[i + 1] @ shapes[i + 1][anchor] - rots[i] @ shapes[i][anchor]
        trans.append(trans[i] + u - drift)
    local = np.stack([shapes[p] @ rots[p].T + trans[p] for p in range(6)])

    pose = Rotation.random(random_state=rng).as_matrix()
    offset = rng.uniform(-spec.pose_translation, spec.pose_translation, size=3)
    clean = local @ pose.T + offset
    noisy = clean + spec.noise_mm * rng.normal(size=clean.shape)

    truth = _ground_truth(a, b, heights, tilts, spins, rots, local)
    pid = f"{'mr' if spec.label else 'nomr'}{index:04d}"
    return SyntheticPatient(LandmarkSet(pid, spec.label, noisy), truth, clean)


def _ground_truth(a, b, heights, tilts, spins, rots, local) -> np.ndarray:
    per_phase = []
    for p in range(6):
        n = rots[p][:, 2]
        per_phase.append(
            PhaseFeatures(
                area=math.pi * a[p] * b[p],
                perimeter=ellipse_perimeter(a[p], b[p]),
                a=float(a[p]),
                b=float(b[p]),
                eccentricity=math.sqrt(1.0 - (b[p] / a[p]) ** 2),
                ba_ratio=float(b[p] / a[p]),
                height=float(heights[p]),
                nx=float(n[0]),
                ny=float(n[1]),
                nz=float(n[2]),
            )
        )
    pos = local  # (phase, point, xyz); registration only translates these
    delta = np.diff(pos, axis=0).transpose(1, 0, 2)
    disp = np.concatenate([delta, np.linalg.norm(delta, axis=-1, keepdims=True)], axis=-1)
    thetas = [wrap_half_turn(s) for s in spins]
    return assemble_features(per_phase, np.abs(tilts), thetas, disp)


def generate_cohorts(specs: Sequence[CohortSpec]) -> tuple[list[LandmarkSet], FeatureTable]:
    """Generate every cohort in ``specs``; returns landmarks and ground-truth features."""
    patients = []
    for spec in specs:
        spec.validate()
        patients += [generate_patient(spec, i) for i in range(spec.n)]
    table = FeatureTable.from_vectors([])
    table.ids = [p.landmarks.patient_id for p in patients]
    table.labels = np.array([p.landmarks.label for p in patients], dtype=int)
    table.X = np.array([p.truth for p in patients]).reshape(len(patients), -1)
    return [p.landmarks for p in patients], table
