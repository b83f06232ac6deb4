"""Synthetic manifold samples, uniform rotations and target graphs."""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy import stats

from .graph import Graph, knn_graph

MANIFOLDS = ("circle", "sphere2", "grid_triangle", "grid_square", "moebius")
GRID_KINDS = ("triangle_plane", "square_plane", "triangle_moebius")
MOEBIUS_HALF_WIDTH = 0.3


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    manifold_tag: str
    ground_truth: np.ndarray
    param_names: tuple[str, ...] = ()

    def __post_init__(self):
        if self.manifold_tag not in MANIFOLDS:
            raise ValueError(f"unknown manifold {self.manifold_tag!r}")
        if len(self.points) != len(self.ground_truth):
            raise ValueError("ground truth must have one row per point")

    def __len__(self):
        return len(self.points)


def sample_circle(m: int, rng_seed=0) -> PointCloud:
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = np.random.default_rng(rng_seed)
    angle = rng.uniform(0.0, 2 * np.pi, m)
    pts = np.stack([np.cos(angle), np.sin(angle)], axis=1)
    return PointCloud(pts, "circle", angle[:, None], ("angle",))


def sample_sphere_uniform(m: int, rng_seed=0) -> PointCloud:
    """Uniform points on the unit 2-sphere (normalized Gaussians)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = np.random.default_rng(rng_seed)
    g = rng.standard_normal((m, 3))
    pts = g / np.linalg.norm(g, axis=1, keepdims=True)
    polar = np.arccos(np.clip(pts[:, 2], -1.0, 1.0))
    azim = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2 * np.pi)
    return PointCloud(pts, "sphere2", np.stack([polar, azim], axis=1), ("polar", "azimuth"))


def moebius_point(u, v):
    """Unit-radius Moebius strip; ``u`` in [0, 2pi), ``v`` across the strip."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    r = 1.0 + v * np.cos(u / 2)
    return np.stack([r * np.cos(u), r * np.sin(u), v * np.sin(u / 2)], axis=-1)


def sample_grid(kind: str, side: int) -> PointCloud:
    """Regular ``side x side`` lattice. Ground truth holds the integer (i, j)."""
    if kind not in GRID_KINDS:
        raise ValueError(f"unsupported grid kind {kind!r}; expected one of {GRID_KINDS}")
    if side < 2:
        raise ValueError("side must be >= 2")
    j, i = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    i = i.ravel().astype(float)
    j = j.ravel().astype(float)
    gt = np.stack([i, j], axis=1)
    if kind == "square_plane":
        return PointCloud(np.stack([i, j], axis=1), "grid_square", gt, ("i", "j"))
    if kind == "triangle_plane":
        pts = np.stack([i + 0.5 * j, j * np.sqrt(3) / 2], axis=1)
        return PointCloud(pts, "grid_triangle", gt, ("i", "j"))
    u, v = moebius_params(i, j, side)
    return PointCloud(moebius_point(u, v), "moebius", gt, ("i", "j"))


def moebius_params(i, j, side):
    """Strip coordinates (u, v) of triangular-lattice index (i, j)."""
    u = 2 * np.pi * (np.asarray(i) + 0.5 * np.asarray(j)) / side
    v = MOEBIUS_HALF_WIDTH * (2 * np.asarray(j) / (side - 1) - 1)
    return np.mod(u, 2 * np.pi), v


def perturb_gaussian(pc: PointCloud, sigma: float, rng_seed=0) -> PointCloud:
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        return replace(pc, points=pc.points.copy())
    rng = np.random.default_rng(rng_seed)
    return replace(pc, points=pc.points + sigma * rng.standard_normal(pc.points.shape))


# --------------------------------------------------------------------------
# rotations

@dataclass(frozen=True)
class EulerAnglesZYZ:
    theta1: float
    theta2: float
    theta3: float

    def __post_init__(self):
        two_pi = 2 * np.pi
        if not (0 <= self.theta1 < two_pi and 0 <= self.theta2 <= np.pi and 0 <= self.theta3 < two_pi):
            raise ValueError(f"Euler angles out of range: {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.theta1, self.theta2, self.theta3])

    @classmethod
    def wrap(cls, t1, t2, t3) -> "EulerAnglesZYZ":
        t1 = float(np.mod(t1, 2 * np.pi))
        t3 = float(np.mod(t3, 2 * np.pi))
        # mod can round up to exactly 2pi for tiny negative inputs
        return cls(0.0 if t1 >= 2 * np.pi else t1, float(t2), 0.0 if t3 >= 2 * np.pi else t3)


def sample_so3_uniform(m: int, rng_seed=0) -> np.ndarray:
    """Haar-uniform rotations as an ``(m, 3)`` array of ZYZ angles."""
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = np.random.default_rng(rng_seed)
    t1 = rng.uniform(0.0, 2 * np.pi, m)
    t2 = np.arccos(rng.uniform(-1.0, 1.0, m))
    t3 = rng.uniform(0.0, 2 * np.pi, m)
    return np.stack([t1, t2, t3], axis=1)


def viewing_direction(theta) -> np.ndarray:
    """Projection axis on S^2 for ZYZ angles; the third angle is ignored.

    Works on a single triple (returns shape (3,)) or an ``(m, 3)`` array.
    """
    if isinstance(theta, EulerAnglesZYZ):
        theta = theta.as_array()
    t = np.asarray(theta, dtype=float)
    t1, t2 = t[..., 0], t[..., 1]
    return np.stack([-np.cos(t1) * np.sin(t2), np.sin(t1) * np.sin(t2), np.cos(t2)], axis=-1)


def antipodal_angles(theta) -> np.ndarray:
    """Angles whose projection is the mirror image of ``theta``'s projection."""
    t = np.asarray(theta, dtype=float)
    return np.stack([
        np.mod(t[..., 0] + np.pi, 2 * np.pi),
        np.pi - t[..., 1],
        np.mod(-t[..., 2], 2 * np.pi),
    ], axis=-1)


# --------------------------------------------------------------------------
# sphere uniformity checks

def equal_area_bin(points) -> np.ndarray:
    """Bin index in 0..47 for unit vectors.

    Octant (8) x two azimuth halves (2) x three |z| bands of equal area (3).
    """
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    octant = (p[:, 0] < 0) * 4 + (p[:, 1] < 0) * 2 + (p[:, 2] < 0)
    half = (np.abs(p[:, 1]) > np.abs(p[:, 0])).astype(int)
    band = np.minimum((np.abs(p[:, 2]) * 3).astype(int), 2)
    return octant * 6 + half * 3 + band


def sphere_chi_square(points) -> tuple[float, float]:
    """Chi-square statistic and p-value against 48 equal-probability bins."""
    counts = np.bincount(equal_area_bin(points), minlength=48)
    res = stats.chisquare(counts)
    return float(res.statistic), float(res.pvalue)


def resultant_norm(points) -> float:
    return float(np.linalg.norm(np.mean(np.asarray(points, dtype=float), axis=0)))


# --------------------------------------------------------------------------
# target graphs

def sphere_metric(flips: bool):
    return "projective" if flips else "geodesic"


def projective_distance(a, b) -> float:
    d = float(np.clip(np.dot(a, b), -1.0, 1.0))
    return float(min(np.arccos(d), np.arccos(-d)))


def build_target_graph(m: int, k: int, sigma: float = 0.01, flips: bool = False, rng_seed=0,
                       return_points: bool = False):
    """Clean K-NN graph on (lightly perturbed) uniform sphere samples.

    The perturbed points are not re-normalized; the geodesic metric measures
    the angle between them, with the cosine clamped to [-1, 1].
    """
    if k >= m:
        raise ValueError(f"insufficient points: need at least k+1={k + 1}, got {m}")
    ss = np.random.SeedSequence(rng_seed)
    s_pts, s_noise = ss.spawn(2)
    pc = sample_sphere_uniform(m, s_pts)
    pc = perturb_gaussian(pc, sigma, s_noise)
    g = knn_graph(pc.points, k, metric=sphere_metric(flips))
    return (g, pc) if return_points else g


def circle_target_graph(m: int, k: int, sigma: float = 0.01, rng_seed=0) -> Graph:
    ss = np.random.SeedSequence(rng_seed)
    s_pts, s_noise = ss.spawn(2)
    pc = perturb_gaussian(sample_circle(m, s_pts), sigma, s_noise)
    return knn_graph(pc.points, k)


# --------------------------------------------------------------------------
# CSV

def write_point_cloud_csv(pc: PointCloud, path) -> None:
    d = pc.points.shape[1]
    names = list(pc.param_names) or [f"param{k}" for k in range(pc.ground_truth.shape[1])]
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow([f"x{k}" for k in range(d)] + names)
        for p, t in zip(pc.points.tolist(), pc.ground_truth.tolist()):
            w.writerow([repr(v) for v in p] + [repr(v) for v in t])


def read_point_cloud_csv(path, manifold_tag: str) -> PointCloud:
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    header = rows[0]
    d = sum(1 for h in header if h.startswith("x") and h[1:].isdigit())
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(header))
    return PointCloud(data[:, :d], manifold_tag, data[:, d:], tuple(header[d:]))


def geodesic_angles(points: np.ndarray, pairs: Sequence) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    e = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return np.arccos(np.clip(np.sum(p[e[:, 0]] * p[e[:, 1]], axis=1), -1.0, 1.0))


def circle_arc_distance(angles: np.ndarray, pairs) -> np.ndarray:
    a = np.asarray(angles, dtype=float).reshape(-1)
    e = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    d = np.abs(a[e[:, 0]] - a[e[:, 1]]) % (2 * np.pi)
    return np.minimum(d, 2 * np.pi - d)
