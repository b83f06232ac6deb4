"""Desk-scale single-particle cryo-EM simulation and graph evaluation.

Conventions
-----------
Volumes are indexed ``data[x, y, z]`` and images ``image[x, y]``, with voxel
coordinates centered at ``(n - 1) / 2``. A rotation with ZYZ angles
``theta`` uses ``R = R_z(t1) R_y(t2) R_z(t3)`` built from the passive
elementary matrices below, and the projection is
``y(x, y) = sum_z rho(R [x, y, z])``. With this choice the integration
direction in the volume frame is exactly ``viewing_direction(theta)`` and the
third angle only rotates the image in-plane.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .graph import Graph
from .manifolds import sample_so3_uniform, viewing_direction

VOLUME_MAGIC = b"MRVOL\0\0\0"
STACK_MAGIC = b"MRSTK\0\0\0"
FORMAT_VERSION = 1


# --------------------------------------------------------------------------
# rotations

def rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])


def rot_2d(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, s], [-s, c]])


def euler_matrix(theta) -> np.ndarray:
    t1, t2, t3 = np.asarray(theta, dtype=float)
    return rot_z(t1) @ rot_y(t2) @ rot_z(t3)


# --------------------------------------------------------------------------
# volumes

@dataclass(frozen=True)
class Volume:
    data: np.ndarray

    def __post_init__(self):
        d = self.data
        if d.ndim != 3 or len(set(d.shape)) != 1:
            raise ValueError("volume must be a cube")
        if d.shape[0] < 8:
            raise ValueError("volume side must be >= 8")
        if not np.all(np.isfinite(d)):
            raise ValueError("volume has non-finite entries")

    @property
    def n(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class Blob:
    center: tuple[float, float, float]
    width: float
    amplitude: float


def centered_grid(n: int) -> np.ndarray:
    return np.arange(n) - (n - 1) / 2


def ball_mask(n: int, dims: int = 3) -> np.ndarray:
    c = centered_grid(n)
    r2 = sum(np.meshgrid(*([c**2] * dims), indexing="ij"))
    return r2 <= ((n - 1) / 2) ** 2


def default_blobs(rng_seed=0, count: int = 12, radius: float = 0.6,
                  widths=(0.08, 0.16)) -> list[Blob]:
    """Random blob configuration; generic draws have no rotational symmetry.

    Centers are uniform in the ball of the given radius.
    """
    rng = np.random.default_rng(rng_seed)
    blobs = []
    while len(blobs) < count:
        c = rng.uniform(-radius, radius, 3)
        if np.linalg.norm(c) > radius:
            continue
        blobs.append(Blob(tuple(c), float(rng.uniform(*widths)), float(rng.uniform(0.5, 1.0))))
    return blobs


def gaussian_blob_phantom(n: int, blobs=None, rng_seed=0) -> Volume:
    """Sum of isotropic Gaussian blobs in the unit box ``[-1, 1]^3``.

    ``blobs`` is a sequence of ``Blob`` or ``(center, width, amplitude)``;
    ``None`` draws the default configuration from ``rng_seed``. Voxels outside
    the inscribed ball are zero.
    """
    if n < 8:
        raise ValueError("volume side must be >= 8")
    if blobs is None:
        blobs = default_blobs(rng_seed)
    half = (n - 1) / 2
    u = centered_grid(n) / half
    x, y, z = np.meshgrid(u, u, u, indexing="ij")
    data = np.zeros((n, n, n))
    for b in blobs:
        if not isinstance(b, Blob):
            b = Blob(tuple(b[0]), float(b[1]), float(b[2]))
        c = np.asarray(b.center, dtype=float)
        if c.shape != (3,) or np.any(np.abs(c) > 1):
            raise ValueError(f"blob center {b.center} lies outside the unit box")
        if not b.width > 0:
            raise ValueError("blob width must be positive")
        r2 = (x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2
        data += b.amplitude * np.exp(-r2 / (2 * b.width**2))
    data[~ball_mask(n)] = 0.0
    return Volume(data)


def rotate_volume(v: Volume, theta) -> np.ndarray:
    """Resampled volume ``rho(R x)`` (trilinear, zero outside the ball)."""
    n = v.n
    c = centered_grid(n)
    grid = np.stack(np.meshgrid(c, c, c, indexing="ij")).reshape(3, -1)
    pts = euler_matrix(theta) @ grid + (n - 1) / 2
    out = ndimage.map_coordinates(v.data, pts, order=1, mode="constant", cval=0.0)
    out = out.reshape(n, n, n)
    out[~ball_mask(n)] = 0.0
    return out


def rotate_project(v: Volume, theta) -> np.ndarray:
    """Projection image of the rotated volume, summed along z."""
    return rotate_volume(v, theta).sum(axis=2)


def project_stack(v: Volume, angles) -> np.ndarray:
    angles = np.asarray(angles, dtype=float).reshape(-1, 3)
    return np.stack([rotate_project(v, t) for t in angles])


def rotate_image(img: np.ndarray, alpha: float) -> np.ndarray:
    """``img(R2(alpha) x)`` by bilinear interpolation, zero outside."""
    n = img.shape[0]
    c = centered_grid(n)
    grid = np.stack(np.meshgrid(c, c, indexing="ij")).reshape(2, -1)
    pts = rot_2d(alpha) @ grid + (n - 1) / 2
    return ndimage.map_coordinates(img, pts, order=1, mode="constant", cval=0.0).reshape(n, n)


def mirror_image(img: np.ndarray) -> np.ndarray:
    """Reflection ``y -> -y``."""
    return np.asarray(img)[..., ::-1]


# --------------------------------------------------------------------------
# noise

def add_noise_for_snr(stack, snr: float, rng_seed=0) -> tuple[np.ndarray, float]:
    """Add white Gaussian noise with variance ``Var(stack) / snr``.

    The clean variance is pooled over every pixel of the stack. Returns the
    noisy stack and the realized ``Var(clean) / Var(noise)``.
    """
    if not snr > 0:
        raise ValueError("snr must be positive")
    clean = np.asarray(stack, dtype=float)
    var = clean.var()
    if not var > 0:
        raise ValueError("clean stack has zero variance")
    rng = np.random.default_rng(rng_seed)
    noise = rng.standard_normal(clean.shape) * np.sqrt(var / snr)
    return clean + noise, float(var / noise.var())


# --------------------------------------------------------------------------
# projection sets

@dataclass(frozen=True)
class ProjectionImage:
    pixels: np.ndarray
    truth_angles: np.ndarray
    truth_axis: np.ndarray


@dataclass
class ProjectionSet:
    images: np.ndarray  # (M, n, n)
    angles: np.ndarray  # (M, 3) ZYZ
    snr_target: float = float("inf")
    phantom_id: str = ""
    realized_snr: float = float("inf")

    def __post_init__(self):
        if self.images.ndim != 3 or self.images.shape[1] != self.images.shape[2]:
            raise ValueError("images must be an (M, n, n) array")
        if len(self.angles) != len(self.images):
            raise ValueError("one angle triple per image required")

    def __len__(self):
        return len(self.images)

    def __getitem__(self, k) -> ProjectionImage:
        return ProjectionImage(self.images[k], self.angles[k], viewing_direction(self.angles[k]))

    @property
    def n(self) -> int:
        return self.images.shape[1]

    @property
    def axes(self) -> np.ndarray:
        return viewing_direction(self.angles)


def simulate_projection_set(v: Volume, m: int, snr: float | None, rng_seed=0,
                            phantom_id: str = "") -> tuple[ProjectionSet, np.ndarray]:
    """Uniform-rotation projections, optionally noised to a target SNR.

    Returns the set and the clean stack.
    """
    ss = np.random.SeedSequence(rng_seed)
    s_rot, s_noise = ss.spawn(2)
    angles = sample_so3_uniform(m, s_rot)
    clean = project_stack(v, angles)
    if snr is None or np.isinf(snr):
        return ProjectionSet(clean.copy(), angles, float("inf"), phantom_id), clean
    noisy, realized = add_noise_for_snr(clean, snr, s_noise)
    return ProjectionSet(noisy, angles, float(snr), phantom_id, realized), clean


# --------------------------------------------------------------------------
# rotation-invariant distance

def polar_resample(img: np.ndarray, n_rot: int = 72, n_r: int | None = None) -> np.ndarray:
    """Bilinear polar samples ``(n_r, n_rot)`` about the image center.

    Radii are 1..n_r pixels; each ring is weighted by ``sqrt(r)`` so that the
    polar l2 norm approximates the Cartesian one.
    """
    img = np.asarray(img, dtype=float)
    n = img.shape[-1]
    if n_r is None:
        n_r = int((n - 1) // 2)
    r = np.arange(1, n_r + 1, dtype=float)
    t = 2 * np.pi * np.arange(n_rot) / n_rot
    x = (n - 1) / 2 + r[:, None] * np.cos(t)[None, :]
    y = (n - 1) / 2 + r[:, None] * np.sin(t)[None, :]
    w = np.sqrt(r)[:, None]
    if img.ndim == 2:
        return w * ndimage.map_coordinates(img, [x, y], order=1, mode="constant", cval=0.0)
    return np.stack([polar_resample(im, n_rot, n_r) for im in img])


def polar_distance(pa: np.ndarray, pb: np.ndarray, flips: bool = True) -> float:
    """Brute-force minimum l2 over cyclic angular shifts (and mirror)."""
    n_rot = pa.shape[1]
    cands = [pb]
    if flips:
        cands.append(pb[:, (-np.arange(n_rot)) % n_rot])
    best = np.inf
    for q in cands:
        for k in range(n_rot):
            d = float(np.sum((pa - np.roll(q, k, axis=1)) ** 2))
            best = min(best, d)
    return float(np.sqrt(best))


def rotation_invariant_distance(a, b, n_rot: int = 72, flips: bool = True) -> float:
    if np.shape(a) != np.shape(b):
        raise ValueError("images must have the same shape")
    if n_rot < 1:
        raise ValueError("n_rot must be >= 1")
    return polar_distance(polar_resample(a, n_rot), polar_resample(b, n_rot), flips)


def pairwise_rotation_invariant_distances(images, n_rot: int = 72, flips: bool = True,
                                          chunk: int = 64) -> np.ndarray:
    """All-pairs rotation-invariant distances via FFT cross-correlation."""
    polar = polar_resample(np.asarray(images, dtype=float), n_rot)
    m = len(polar)
    spec = np.fft.rfft(polar, axis=2)  # (m, n_r, F)
    norms = np.sum(polar**2, axis=(1, 2))
    out = np.empty((m, m))
    for start in range(0, m, chunk):
        blk = spec[start:start + chunk]
        # cross-correlation with every cyclic shift of each partner
        corr = np.fft.irfft(np.einsum("irf,jrf->ijf", blk, spec.conj()), n=n_rot, axis=2).max(axis=2)
        if flips:
            # mirroring a real ring conjugates its spectrum
            corr_m = np.fft.irfft(np.einsum("irf,jrf->ijf", blk, spec), n=n_rot, axis=2).max(axis=2)
            corr = np.maximum(corr, corr_m)
        d2 = norms[start:start + chunk, None] + norms[None, :] - 2 * corr
        out[start:start + chunk] = np.sqrt(np.maximum(d2, 0.0))
    out = np.minimum(out, out.T)
    np.fill_diagonal(out, 0.0)
    return out


# --------------------------------------------------------------------------
# viewing-direction metrics

def d_view(a: ProjectionImage, b: ProjectionImage) -> float:
    return float(np.arccos(np.clip(np.dot(a.truth_axis, b.truth_axis), -1.0, 1.0)))


def axis_angles(axes: np.ndarray, pairs, flips: bool = False) -> np.ndarray:
    """Great-circle angles (radians) between axes of each pair."""
    e = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    dots = np.clip(np.sum(axes[e[:, 0]] * axes[e[:, 1]], axis=1), -1.0, 1.0)
    ang = np.arccos(dots)
    return np.minimum(ang, np.pi - ang) if flips else ang


def edge_view_angles(g: Graph, proj: ProjectionSet, flips: bool = False) -> np.ndarray:
    e = g.edge_array()
    if len(e) and (e.min() < 0 or e.max() >= len(proj)):
        raise KeyError("graph vertex without a matching projection")
    return axis_angles(proj.axes, e, flips)


def edge_angle_histogram(g: Graph, proj: ProjectionSet, bins: int = 60, flips: bool = True,
                         range_deg=(0.0, 60.0)) -> tuple[np.ndarray, np.ndarray]:
    """Density of edge viewing angles in degrees.

    Normalized by the total edge count, so mass beyond ``range_deg`` is not
    redistributed into the bins.
    """
    ang = np.degrees(edge_view_angles(g, proj, flips))
    counts, edges = np.histogram(ang, bins=bins, range=range_deg)
    width = edges[1] - edges[0]
    centers = (edges[:-1] + edges[1:]) / 2
    density = counts / (max(len(ang), 1) * width)
    return centers, density


def write_histogram_csv(centers, density, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["bin_center", "density"])
        for c, d in zip(centers, density):
            w.writerow([f"{c:.6f}", f"{d:.10g}"])


# --------------------------------------------------------------------------
# binary files

def write_volume(v: Volume, path) -> None:
    with open(path, "wb") as f:
        f.write(VOLUME_MAGIC)
        f.write(struct.pack("<II", FORMAT_VERSION, v.n))
        f.write(np.asarray(v.data, dtype="<f8").tobytes(order="F"))


def read_volume(path) -> Volume:
    raw = Path(path).read_bytes()
    if raw[:8] != VOLUME_MAGIC:
        raise ValueError(f"{path}: not a volume file")
    version, n = struct.unpack("<II", raw[8:16])
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    data = np.frombuffer(raw[16:], dtype="<f8")
    if data.size != n**3:
        raise ValueError(f"{path}: truncated volume")
    return Volume(data.reshape((n, n, n), order="F").astype(float))


def write_projection_set(ps: ProjectionSet, path) -> None:
    with open(path, "wb") as f:
        f.write(STACK_MAGIC)
        f.write(struct.pack("<III", FORMAT_VERSION, ps.n, len(ps)))
        for angles, img in zip(ps.angles, ps.images):
            f.write(np.asarray(angles, dtype="<f8").tobytes())
            f.write(np.asarray(img, dtype="<f8").tobytes(order="F"))


def read_projection_set(path) -> ProjectionSet:
    raw = Path(path).read_bytes()
    if raw[:8] != STACK_MAGIC:
        raise ValueError(f"{path}: not a projection stack")
    version, n, m = struct.unpack("<III", raw[8:20])
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    rec = 3 + n * n
    body = np.frombuffer(raw[20:], dtype="<f8")
    if body.size != m * rec:
        raise ValueError(f"{path}: truncated projection stack")
    body = body.reshape(m, rec)
    images = np.stack([r[3:].reshape((n, n), order="F") for r in body]) if m else np.zeros((0, n, n))
    return ProjectionSet(images.astype(float), body[:, :3].astype(float))
