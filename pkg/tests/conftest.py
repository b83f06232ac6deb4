"""Shared oracles for the test suite.

The walk oracle enumerates walks one step at a time. It does not share any
code with the library's BFS and sparse walk kernels.
"""
import itertools

import numpy as np
import pytest

from manifold_rewiring.graph import Graph


def random_graph(rng, n_max=8, p=None):
    n = int(rng.integers(2, n_max + 1))
    p = rng.uniform(0.15, 0.8) if p is None else p
    edges = [(i, j) for i, j in itertools.combinations(range(n), 2) if rng.random() < p]
    return Graph(range(n), edges)


def enumerate_walks(adj: dict, k: int, i, j) -> int:
    """Count length-k walks from i to j by explicit enumeration."""
    count = 0
    stack = [(i, 0)]
    while stack:
        v, d = stack.pop()
        if d == k:
            count += v == j
            continue
        for w in adj[v]:
            stack.append((w, d + 1))
    return count


def hop_distances(n, edges, sources):
    """Floyd-Warshall hop distances from the nearest source."""
    inf = n + 1
    d = np.full((n, n), inf, dtype=int)
    np.fill_diagonal(d, 0)
    for a, b in edges:
        d[a, b] = d[b, a] = 1
    for m in range(n):
        d = np.minimum(d, d[:, [m]] + d[[m], :])
    return d[list(sources)].min(axis=0)


def oracle_features(g: Graph, e, h):
    """Walk-feature matrix by subgraph enumeration and explicit walk counting."""
    ids = list(g.vertex_ids)
    pos = {v: k for k, v in enumerate(ids)}
    edges = [(pos[a], pos[b]) for a, b in g.edges]
    u, v = pos[e[0]], pos[e[1]]
    dist = hop_distances(len(ids), edges, (u, v))
    keep = {x for x in range(len(ids)) if dist[x] <= h}
    sub = {(a, b) for a, b in edges if a in keep and b in keep}
    focus = (min(u, v), max(u, v))
    out = np.zeros((2, 2 * h - 1), dtype=np.int64)
    for row, es in enumerate((sub | {focus}, sub - {focus})):
        adj = {x: [] for x in keep}
        for a, b in es:
            adj[a].append(b)
            adj[b].append(a)
        for col, k in enumerate(range(2, 2 * h + 1)):
            out[row, col] = enumerate_walks(adj, k, u, v)
    return out


@pytest.fixture
def triangle():
    return Graph(range(3), [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
