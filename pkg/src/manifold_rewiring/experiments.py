"""End-to-end experiment pipelines shared by the CLI and the acceptance suite."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import mannwhitneyu

from .cryoem import (
    ProjectionSet,
    edge_view_angles,
    gaussian_blob_phantom,
    pairwise_rotation_invariant_distances,
    simulate_projection_set,
)
from .graph import Graph, knn_from_distances, knn_graph
from .manifolds import (
    PointCloud,
    build_target_graph,
    circle_arc_distance,
    circle_target_graph,
    perturb_gaussian,
    resultant_norm,
    sample_circle,
    sample_grid,
    sample_so3_uniform,
    sphere_chi_square,
    viewing_direction,
)
from .mlp import TrainConfig, TrainResult, train
from .rewiring import RewireReport, iterative_rewire, threshold_denoise
from .walk import build_training_set

CIRCLE_SIGMAS = (0.03, 0.05, 0.1)
GRID_DEGREE = {"triangle_plane": 6, "square_plane": 4, "triangle_moebius": 6}


def _seeds(seed, n):
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def train_on_targets(targets, h: int, epochs: int = 100, rng_seed=0, validation_fraction: float = 0.0,
                     threads: int = 1) -> TrainResult:
    """Fit one scorer on the pooled training sets of several target graphs."""
    targets = list(targets)
    if not targets:
        raise ValueError("need at least one target graph")
    seeds = _seeds(rng_seed, len(targets) + 1)
    sets = [build_training_set(t, h, rng_seed=s, threads=threads) for t, s in zip(targets, seeds)]
    X = np.concatenate([s.X for s in sets])
    y = np.concatenate([s.labels for s in sets])
    cfg = TrainConfig(epochs=epochs, rng_seed=seeds[-1], validation_fraction=validation_fraction)
    return train(X, y, cfg)


def greater_pvalue(a, b) -> float:
    """One-sided Mann-Whitney p-value for ``a`` stochastically greater than ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) == 0 or len(b) == 0:
        return 1.0
    return float(mannwhitneyu(a, b, alternative="greater").pvalue)


# --------------------------------------------------------------------------
# circle

@dataclass
class CircleLevel:
    sigma: float
    noisy: Graph
    denoised: Graph
    report: RewireReport
    noisy_arc: np.ndarray
    removed_arc: np.ndarray
    retained_arc: np.ndarray
    p_value: float

    @property
    def passed(self) -> bool:
        return bool(self.p_value < 0.01 and len(self.removed_arc) > 0
                and self.removed_arc.mean() > self.retained_arc.mean()
                and self.retained_arc.mean() < self.noisy_arc.mean())


@dataclass
class CircleResult:
    cloud: PointCloud
    levels: list[CircleLevel]
    train: TrainResult
    config: dict = field(default_factory=dict)


def run_circle(m: int = 100, k: int = 10, sigmas=CIRCLE_SIGMAS, h: int = 1, tau: float = 0.5,
               epochs: int = 100, copies: int = 10, method: str = "threshold", rng_seed=0,
               threads: int = 1) -> CircleResult:
    """Denoise noisy circle K-NN graphs with a scorer trained on clean circles.

    The target graphs have the same size and K as the noisy one.
    """
    if method not in ("threshold", "iterative"):
        raise ValueError(f"unknown method {method!r}")
    s_targets, s_train, s_pts, s_noise, s_rewire = _seeds(rng_seed, 5)
    targets = [circle_target_graph(m, k, 0.01, s) for s in _seeds(s_targets, copies)]
    fit = train_on_targets(targets, h, epochs, s_train, threads=threads)
    cloud = sample_circle(m, s_pts)
    angle = cloud.ground_truth[:, 0]
    levels = []
    for sigma, s in zip(sigmas, _seeds(s_noise, len(sigmas))):
        noisy = knn_graph(perturb_gaussian(cloud, sigma, s).points, k)
        if method == "threshold":
            out, rep = threshold_denoise(noisy, fit.params, h, tau, threads=threads)
        else:
            out, rep = iterative_rewire(noisy, fit.params, h, tau, rng_seed=s_rewire, threads=threads)
        removed = circle_arc_distance(angle, np.array(rep.removed_edges, dtype=np.int64).reshape(-1, 2))
        retained = circle_arc_distance(angle, out.edge_array())
        noisy_arc = circle_arc_distance(angle, noisy.edge_array())
        levels.append(CircleLevel(float(sigma), noisy, out, rep, noisy_arc, removed, retained,
                                  greater_pvalue(removed, retained)))
    config = dict(m=m, k=k, sigmas=[float(s) for s in sigmas], h=h, tau=tau, epochs=epochs,
                  copies=copies, method=method, seed=rng_seed)
    return CircleResult(cloud, levels, fit, config)


# --------------------------------------------------------------------------
# grids

@dataclass
class GridResult:
    cloud: PointCloud
    noisy: Graph
    denoised: Graph
    report: RewireReport
    noisy_length: np.ndarray
    retained_length: np.ndarray
    removed_length: np.ndarray


def clean_edge_lengths(cloud: PointCloud, pairs) -> np.ndarray:
    e = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return np.linalg.norm(cloud.points[e[:, 0]] - cloud.points[e[:, 1]], axis=1)


def run_grid(kind: str = "triangle_moebius", side: int = 12, sigma: float = 0.3, k: int | None = None,
             h: int = 1, tau: float = 0.5, epochs: int = 100, copies: int = 5, rng_seed=0,
             threads: int = 1) -> GridResult:
    """Grid analogue of the circle experiment.

    Targets are K-NN graphs of the grid under a tiny jitter, which breaks the
    lattice distance ties.
    """
    if k is None:
        k = GRID_DEGREE.get(kind, 6)
    s_targets, s_train, s_noise = _seeds(rng_seed, 3)
    cloud = sample_grid(kind, side)
    scale = 1.0 if kind != "triangle_moebius" else 2 * np.pi / side
    targets = [knn_graph(perturb_gaussian(cloud, 0.01 * scale, s).points, k)
               for s in _seeds(s_targets, copies)]
    fit = train_on_targets(targets, h, epochs, s_train, threads=threads)
    noisy = knn_graph(perturb_gaussian(cloud, sigma * scale, s_noise).points, k)
    out, rep = threshold_denoise(noisy, fit.params, h, tau, threads=threads)
    removed = np.array(rep.removed_edges, dtype=np.int64).reshape(-1, 2)
    return GridResult(cloud, noisy, out, rep, clean_edge_lengths(cloud, noisy.edge_array()),
                      clean_edge_lengths(cloud, out.edge_array()), clean_edge_lengths(cloud, removed))


# --------------------------------------------------------------------------
# cryo-EM

@dataclass
class CryoResult:
    projections: ProjectionSet
    noisy: Graph
    rewired: Graph
    report: RewireReport
    angles_before: np.ndarray
    angles_after: np.ndarray
    p_value: float

    @property
    def median_before(self) -> float:
        return float(np.median(self.angles_before))

    @property
    def median_after(self) -> float:
        return float(np.median(self.angles_after)) if len(self.angles_after) else float("nan")

    @property
    def mean_degree(self) -> float:
        g = self.rewired
        return 2 * g.n_edges / g.n_vertices if g.n_vertices else 0.0


def train_sphere_scorer(m: int = 500, k: int = 12, h: int = 2, epochs: int = 100, flips: bool = True,
                        rng_seed=0, validation_fraction: float = 0.0, threads: int = 1) -> TrainResult:
    s_graph, s_train = _seeds(rng_seed, 2)
    target = build_target_graph(m, k, 0.01, flips, s_graph)
    return train_on_targets([target], h, epochs, s_train, validation_fraction, threads)


def affinity_graph(images, k: int, flips: bool = True) -> Graph:
    return knn_from_distances(pairwise_rotation_invariant_distances(images, flips=flips), k)


def run_cryo(n: int = 32, m: int = 500, k: int = 12, snr: float = 0.05, h: int = 2, tau: float = 0.5,
             epochs: int = 100, rng_seed=0, params=None, max_iters: int = 2000, mode: str = "sequential",
             threads: int = 1, progress=None) -> CryoResult:
    """Simulate, build the affinity graph, rewire and compare folded view angles.

    The scorer is trained on a projective-sphere target graph of the same size
    and K unless ``params`` is given.
    """
    s_vol, s_data, s_train, s_rewire = _seeds(rng_seed, 4)
    if params is None:
        params = train_sphere_scorer(m, k, h, epochs, True, s_train, threads=threads).params
    vol = gaussian_blob_phantom(n, rng_seed=s_vol)
    proj, _ = simulate_projection_set(vol, m, snr, s_data, phantom_id=f"blobs-{s_vol}")
    noisy = affinity_graph(proj.images, k, flips=True)
    out, rep = iterative_rewire(noisy, params, h, tau, max_iters=max_iters, rng_seed=s_rewire,
                                mode=mode, threads=threads, progress=progress)
    before = edge_view_angles(noisy, proj, flips=True)
    after = edge_view_angles(out, proj, flips=True)
    return CryoResult(proj, noisy, out, rep, before, after, greater_pvalue(before, after))


# --------------------------------------------------------------------------
# uniform rotations

def verify_uniform_directions(count: int = 50_000, rng_seed=0) -> dict:
    """Chi-square and resultant-norm check of viewing directions of random rotations."""
    axes = viewing_direction(sample_so3_uniform(count, rng_seed))
    stat, p = sphere_chi_square(axes)
    return {"count": count, "chi_square": stat, "p_value": p, "resultant_norm": resultant_norm(axes),
            "max_norm_error": float(np.max(np.abs(np.linalg.norm(axes, axis=1) - 1.0)))}
