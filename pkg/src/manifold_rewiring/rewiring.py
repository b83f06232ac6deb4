"""Graph denoising with a trained link scorer."""
from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, prune_isolated
from .mlp import MlpParams, forward
from .walk import check_walk_range, n_features, scale_features, walk_features_local


@dataclass
class RewireReport:
    removals_per_iteration: list[int] = field(default_factory=list)
    final_degree_histogram: dict[int, int] = field(default_factory=dict)
    removed_edges: list[tuple[int, int]] = field(default_factory=list)
    iterations: int = 0
    edge_counts: list[int] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return bool(self.removals_per_iteration) and self.removals_per_iteration[-1] == 0


class LinkScorer:
    """Scores candidate pairs of a CSR graph with the walk-feature MLP."""

    def __init__(self, params: MlpParams, h: int, threads: int = 1, backend=None):
        if params.input_width != n_features(h):
            raise ValueError(
                f"scorer expects {params.input_width} features but h={h} gives {n_features(h)}"
            )
        self.params = params
        self.h = h
        self.threads = threads
        self.backend = backend

    def score_local(self, indptr, indices, alive, pairs) -> np.ndarray:
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if len(pairs) == 0:
            return np.zeros(0)
        raw = walk_features_local(indptr, indices, alive, pairs, self.h,
                                  threads=self.threads, backend=self.backend)
        return forward(self.params, scale_features(raw))

    def score_edges(self, g: Graph, pairs=None) -> np.ndarray:
        """Scores for ``pairs`` (external ids; default: every edge, sorted)."""
        if pairs is None:
            pairs = g.edge_array()
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        local = np.searchsorted(g.vertex_ids, pairs)
        indptr, indices = g.csr()
        return self.score_local(indptr, indices, None, local)


class _LiveGraph:
    """Removal-only view of a graph: fixed CSR plus per-slot liveness flags."""

    def __init__(self, g: Graph):
        self.ids = g.vertex_ids
        self.indptr, self.indices = g.csr()
        self.alive = np.ones(len(self.indices), dtype=np.uint8)
        self.degree = np.diff(self.indptr).astype(np.int64)
        self.n_edges = g.n_edges

    def live_neighbors(self, a: int) -> np.ndarray:
        lo, hi = self.indptr[a], self.indptr[a + 1]
        return self.indices[lo:hi][self.alive[lo:hi].astype(bool)]

    def _slot(self, a, b):
        lo, hi = self.indptr[a], self.indptr[a + 1]
        return lo + np.searchsorted(self.indices[lo:hi], b)

    def is_alive(self, a, b) -> bool:
        s = self._slot(a, b)
        return s < self.indptr[a + 1] and self.indices[s] == b and self.alive[s] == 1

    def remove(self, a: int, b: int) -> None:
        self.alive[self._slot(a, b)] = 0
        self.alive[self._slot(b, a)] = 0
        self.degree[a] -= 1
        self.degree[b] -= 1
        self.n_edges -= 1

    def to_graph(self) -> Graph:
        rows = np.repeat(np.arange(len(self.ids)), np.diff(self.indptr))
        keep = (self.alive == 1) & (rows < self.indices)
        edges = np.stack([self.ids[rows[keep]], self.ids[self.indices[keep]]], axis=1)
        return Graph(self.ids, map(tuple, edges.tolist()))

    def external(self, a, b) -> tuple[int, int]:
        x, y = int(self.ids[a]), int(self.ids[b])
        return (x, y) if x < y else (y, x)


def degree_histogram(g: Graph) -> dict[int, int]:
    return dict(sorted(Counter(g.degrees().tolist()).items()))


def threshold_denoise(g: Graph, scorer: MlpParams, h: int, tau: float = 0.5,
                      threads: int = 1) -> tuple[Graph, RewireReport]:
    """Score every edge once on ``g`` and drop those below ``tau`` together."""
    link = LinkScorer(scorer, h, threads=threads)
    pairs = g.edge_array()
    scores = link.score_edges(g, pairs)
    drop = pairs[scores < tau]
    kept = Graph(g.vertex_ids, g.edges - set(map(tuple, drop.tolist())))
    out = prune_isolated(kept)
    report = RewireReport(
        removals_per_iteration=[len(drop)],
        final_degree_histogram=degree_histogram(out),
        removed_edges=[tuple(p) for p in drop.tolist()],
        iterations=1,
        edge_counts=[g.n_edges, out.n_edges],
    )
    return out, report


def iterative_rewire(g: Graph, scorer: MlpParams, h: int, tau: float = 0.5, max_iters: int = 2000,
                     rng_seed=0, mode: str = "sequential", threads: int = 1,
                     progress=None) -> tuple[Graph, RewireReport]:
    """Random-edge rewiring loop.

    Each iteration visits the vertices in ascending id order, draws one live
    incident edge per vertex and removes it when its score on the current
    graph falls below ``tau``. The loop ends after an iteration without
    removals or after ``max_iters`` iterations.

    ``mode="sequential"`` scores and removes edge by edge. ``mode="batch"``
    draws all candidates first, scores them on the frozen snapshot and then
    removes the low scorers.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if mode not in ("sequential", "batch"):
        raise ValueError(f"unknown mode {mode!r}")
    link = LinkScorer(scorer, h, threads=threads)
    live = _LiveGraph(g)
    check_walk_range(int(live.degree.max()) if len(live.degree) else 0, h)
    rng = np.random.default_rng(rng_seed)
    report = RewireReport(edge_counts=[live.n_edges])
    n = len(live.ids)
    for it in range(max_iters):
        removed = 0
        if mode == "sequential":
            for a in range(n):
                if live.degree[a] == 0:
                    continue
                nb = live.live_neighbors(a)
                b = int(nb[rng.integers(len(nb))])
                s = link.score_local(live.indptr, live.indices, live.alive, [(a, b)])[0]
                if s < tau:
                    live.remove(a, b)
                    report.removed_edges.append(live.external(a, b))
                    removed += 1
        else:
            cand = {}
            for a in range(n):
                if live.degree[a] == 0:
                    continue
                nb = live.live_neighbors(a)
                b = int(nb[rng.integers(len(nb))])
                cand.setdefault((min(a, b), max(a, b)), None)
            pairs = np.array(list(cand), dtype=np.int64).reshape(-1, 2)
            scores = link.score_local(live.indptr, live.indices, live.alive, pairs)
            for (a, b), s in zip(pairs.tolist(), scores):
                if s < tau:
                    live.remove(a, b)
                    report.removed_edges.append(live.external(a, b))
                    removed += 1
        report.removals_per_iteration.append(removed)
        report.edge_counts.append(live.n_edges)
        if progress is not None:
            progress(it, removed, live.n_edges)
        if removed == 0:
            break
    report.iterations = len(report.removals_per_iteration)
    out = prune_isolated(live.to_graph())
    report.final_degree_histogram = degree_histogram(out)
    return out, report


def select_trustworthy(g: Graph, count: int) -> list[int]:
    """The ``count`` highest-degree vertices; ties go to the smaller id."""
    if count < 1:
        raise ValueError("count must be positive")
    deg = g.degrees()
    order = np.lexsort((g.vertex_ids, -deg))
    return [int(v) for v in g.vertex_ids[order[:count]]]


def write_report_csv(report: RewireReport, removals_path, degrees_path) -> None:
    with open(removals_path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["iteration", "removed"])
        for k, r in enumerate(report.removals_per_iteration, 1):
            w.writerow([k, r])
    with open(degrees_path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["degree", "count"])
        for d, c in sorted(report.final_degree_histogram.items()):
            w.writerow([d, c])


def read_report_csv(removals_path, degrees_path) -> RewireReport:
    with open(removals_path, newline="", encoding="utf-8") as f:
        removals = [int(r["removed"]) for r in csv.DictReader(f)]
    with open(degrees_path, newline="", encoding="utf-8") as f:
        hist = {int(r["degree"]): int(r["count"]) for r in csv.DictReader(f)}
    return RewireReport(removals, hist, iterations=len(removals))
