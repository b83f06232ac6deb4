"""Undirected simple graphs, K-NN construction and enclosing subgraphs.

Vertices carry external integer ids that survive removal of other vertices.
All edge pairs passed in or out of this module use those external ids.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
import scipy.sparse as sp

INT64_MAX = np.iinfo(np.int64).max


def _norm_pair(i, j):
    i, j = int(i), int(j)
    return (i, j) if i < j else (j, i)


class Graph:
    """Immutable undirected simple graph.

    ``vertex_ids`` is kept sorted; ``edges`` is a frozenset of ``(i, j)``
    tuples with ``i < j``.
    """

    __slots__ = ("_ids", "_edges", "_index", "_csr")

    def __init__(self, vertex_ids: Iterable[int], edges: Iterable[tuple[int, int]] = ()):
        ids = np.unique(np.asarray(list(vertex_ids), dtype=np.int64))
        self._ids = ids
        self._index = {int(v): k for k, v in enumerate(ids)}
        es = set()
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-loop on vertex {i}")
            if int(i) not in self._index or int(j) not in self._index:
                raise ValueError(f"edge ({i}, {j}) has an endpoint that is not a vertex")
            es.add(_norm_pair(i, j))
        self._edges = frozenset(es)
        self._csr = None

    @classmethod
    def from_edge_array(cls, n_vertices: int, edges: np.ndarray) -> "Graph":
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        return cls(range(n_vertices), map(tuple, edges.tolist()))

    # basic queries
    @property
    def vertex_ids(self) -> np.ndarray:
        return self._ids

    @property
    def edges(self) -> frozenset:
        return self._edges

    @property
    def n_vertices(self) -> int:
        return len(self._ids)

    @property
    def n_edges(self) -> int:
        return len(self._edges)

    def __len__(self):
        return self.n_vertices

    def __contains__(self, v) -> bool:
        return int(v) in self._index

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return np.array_equal(self._ids, other._ids) and self._edges == other._edges

    def __repr__(self):
        return f"Graph(n_vertices={self.n_vertices}, n_edges={self.n_edges})"

    def index_of(self, v: int) -> int:
        try:
            return self._index[int(v)]
        except KeyError:
            raise KeyError(f"vertex {v} is not in the graph") from None

    def has_edge(self, i: int, j: int) -> bool:
        return _norm_pair(i, j) in self._edges

    def edge_array(self) -> np.ndarray:
        """Sorted ``(E, 2)`` array of edges in external ids."""
        if not self._edges:
            return np.zeros((0, 2), dtype=np.int64)
        return np.array(sorted(self._edges), dtype=np.int64)

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Symmetric CSR structure ``(indptr, indices)`` over local indices.

        Column indices within a row are sorted.
        """
        if self._csr is None:
            n = self.n_vertices
            e = self.edge_array()
            if len(e):
                li = np.searchsorted(self._ids, e[:, 0])
                lj = np.searchsorted(self._ids, e[:, 1])
                rows = np.concatenate([li, lj])
                cols = np.concatenate([lj, li])
            else:
                rows = cols = np.zeros(0, dtype=np.int64)
            order = np.lexsort((cols, rows))
            rows, cols = rows[order], cols[order]
            indptr = np.zeros(n + 1, dtype=np.int64)
            np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
            self._csr = (indptr, cols.astype(np.int64))
        return self._csr

    def adjacency(self) -> sp.csr_matrix:
        indptr, indices = self.csr()
        data = np.ones(len(indices), dtype=np.int64)
        n = self.n_vertices
        return sp.csr_matrix((data, indices, indptr), shape=(n, n))

    def neighbors(self, v: int) -> np.ndarray:
        indptr, indices = self.csr()
        k = self.index_of(v)
        return self._ids[indices[indptr[k]:indptr[k + 1]]]

    def degree(self, v: int) -> int:
        indptr, _ = self.csr()
        k = self.index_of(v)
        return int(indptr[k + 1] - indptr[k])

    def degrees(self) -> np.ndarray:
        """Degrees aligned with ``vertex_ids``."""
        return np.diff(self.csr()[0])


# --------------------------------------------------------------------------
# construction

def _pairwise_rows(points: np.ndarray, rows: slice, metric) -> np.ndarray:
    block = points[rows]
    if metric == "euclidean":
        d2 = (
            np.sum(block**2, axis=1)[:, None]
            + np.sum(points**2, axis=1)[None, :]
            - 2.0 * block @ points.T
        )
        return np.sqrt(np.maximum(d2, 0.0))
    if metric in ("geodesic", "projective"):
        # angle between directions; off-sphere points are projected radially
        unit = points / np.linalg.norm(points, axis=1, keepdims=True)
        dots = unit[rows] @ unit.T
        if metric == "projective":
            dots = np.abs(dots)
        return np.arccos(np.clip(dots, -1.0, 1.0))
    if callable(metric):
        return np.array([[metric(a, b) for b in points] for a in block], dtype=float)
    raise ValueError(f"unknown metric {metric!r}")


def _k_smallest(row: np.ndarray, k: int) -> np.ndarray:
    # ties broken by smaller index
    cand = np.argpartition(row, k - 1)[:k]
    kth = row[cand].max()
    below = np.flatnonzero(row < kth)
    at = np.flatnonzero(row == kth)
    return np.concatenate([below, at[: k - len(below)]])


def knn_from_distances(dist: np.ndarray, k: int) -> Graph:
    """Union-symmetrized K-NN graph from a dense distance matrix."""
    dist = np.asarray(dist, dtype=float)
    m = dist.shape[0]
    if dist.shape != (m, m):
        raise ValueError("distance matrix must be square")
    if k < 1:
        raise ValueError("k must be positive")
    if m < k + 1:
        raise ValueError(f"insufficient points: need at least k+1={k + 1}, got {m}")
    edges = []
    for i in range(m):
        row = dist[i].copy()
        row[i] = np.inf
        for j in _k_smallest(row, k):
            edges.append((i, int(j)))
    return Graph(range(m), edges)


def knn_graph(points, k: int, metric: str | Callable = "euclidean", chunk: int = 1024) -> Graph:
    """K-nearest-neighbor graph, symmetrized by union.

    ``metric`` is ``"euclidean"``, ``"geodesic"`` (angle between the
    vectors, i.e. arccos of the normalized dot product), ``"projective"``
    (geodesic with antipodes identified) or a callable ``metric(a, b)`` on
    two points. Distance ties go to the smaller vertex index.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    m = pts.shape[0]
    if k < 1:
        raise ValueError("k must be positive")
    if m < k + 1:
        raise ValueError(f"insufficient points: need at least k+1={k + 1}, got {m}")
    src, dst = [], []
    for start in range(0, m, chunk):
        rows = slice(start, min(start + chunk, m))
        block = _pairwise_rows(pts, rows, metric)
        for r, row in enumerate(block):
            i = start + r
            row[i] = np.inf
            nn = _k_smallest(row, k)
            src.append(np.full(k, i))
            dst.append(nn)
    src = np.concatenate(src)
    dst = np.concatenate(dst)
    pairs = np.unique(np.sort(np.stack([src, dst], axis=1), axis=1), axis=0)
    return Graph(range(m), map(tuple, pairs.tolist()))


# --------------------------------------------------------------------------
# enclosing subgraphs and walks

@dataclass(frozen=True)
class EnclosingSubgraph:
    """Subgraph around a focus pair; focus endpoints sit at local 0 and 1."""

    graph: Graph
    focus_edge: tuple[int, int] = (0, 1)
    local_to_global: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


def hop_ball(g: Graph, seeds: Iterable[int], h: int, skip_edge=None) -> list[int]:
    """Vertices within ``h`` hops of any seed, in BFS discovery order."""
    skip = _norm_pair(*skip_edge) if skip_edge is not None else None
    seeds = [int(s) for s in seeds]
    dist = {s: 0 for s in seeds}
    order = list(dict.fromkeys(seeds))
    queue = deque(order)
    while queue:
        v = queue.popleft()
        if dist[v] == h:
            continue
        for w in g.neighbors(v):
            w = int(w)
            if w in dist or (skip is not None and _norm_pair(v, w) == skip):
                continue
            dist[w] = dist[v] + 1
            order.append(w)
            queue.append(w)
    return order


def extract_enclosing_subgraph(g: Graph, e: tuple[int, int], h: int) -> EnclosingSubgraph:
    """h-hop enclosing subgraph of the pair ``e``.

    Vertex set: everything within ``h`` hops of either endpoint (the edge
    ``e`` itself is ignored while measuring hops); edges: induced from ``g``.
    """
    u, v = int(e[0]), int(e[1])
    if u == v:
        raise ValueError("focus pair must join two distinct vertices")
    for x in (u, v):
        if x not in g:
            raise KeyError(f"vertex {x} is not in the graph")
    if h < 1:
        raise ValueError("h must be positive")
    ball = hop_ball(g, (u, v), h, skip_edge=(u, v))
    local = {x: k for k, x in enumerate(ball)}
    sub_edges = []
    for x in ball:
        for y in g.neighbors(x):
            y = int(y)
            if y in local and local[x] < local[y]:
                sub_edges.append((local[x], local[y]))
    sub = Graph(range(len(ball)), sub_edges)
    return EnclosingSubgraph(sub, (0, 1), np.asarray(ball, dtype=np.int64))


def walk_count_bound(max_degree: int, k: int) -> int:
    """Upper bound on any entry of ``A**k`` for a graph of given max degree."""
    return int(max_degree) ** int(k)


def adjacency_power_entry(g: Graph, k: int, i: int, j: int) -> int:
    """Number of walks of length ``k`` from ``i`` to ``j`` (exact)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    a = g.adjacency()
    si, sj = g.index_of(i), g.index_of(j)
    deg = g.degrees()
    if walk_count_bound(deg.max() if len(deg) else 0, k) > INT64_MAX:
        raise OverflowError(f"walk counts of length {k} may exceed int64")
    x = np.zeros(g.n_vertices, dtype=np.int64)
    x[si] = 1
    for _ in range(k):
        x = a @ x
    return int(x[sj])


# --------------------------------------------------------------------------
# mutation (returns new graphs)

@dataclass
class RemovalReport:
    removed: int
    absent: int


def remove_edges(g: Graph, to_remove: Iterable[tuple[int, int]], report: RemovalReport | None = None) -> Graph:
    """Copy of ``g`` without the listed edges. Absent edges are ignored."""
    drop = {_norm_pair(i, j) for i, j in to_remove}
    hit = drop & g.edges
    if report is not None:
        report.removed = len(hit)
        report.absent = len(drop) - len(hit)
    return Graph(g.vertex_ids, g.edges - hit)


def prune_isolated(g: Graph) -> Graph:
    """Drop degree-0 vertices; survivors keep their ids."""
    keep = g.vertex_ids[g.degrees() > 0]
    return Graph(keep, g.edges)


# --------------------------------------------------------------------------
# edge-list I/O

def write_edge_list(g: Graph, path) -> None:
    ids = g.vertex_ids
    lines = [f"# vertices={g.n_vertices}"]
    if not np.array_equal(ids, np.arange(len(ids))):
        lines.append("# ids=" + ",".join(str(int(v)) for v in ids))
    lines.extend(f"{i} {j}" for i, j in sorted(g.edges))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_edge_list(path) -> Graph:
    n = None
    ids = None
    edges = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("vertices="):
                n = int(body.split("=", 1)[1])
            elif body.startswith("ids="):
                payload = body.split("=", 1)[1]
                ids = [int(t) for t in payload.split(",") if t]
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'i j', got {raw!r}")
        edges.append((int(parts[0]), int(parts[1])))
    if n is None:
        raise ValueError(f"{path}: missing '# vertices=<M>' header")
    if ids is None:
        ids = range(n)
    elif len(ids) != n:
        raise ValueError(f"{path}: ids line lists {len(ids)} vertices, header says {n}")
    return Graph(ids, edges)
