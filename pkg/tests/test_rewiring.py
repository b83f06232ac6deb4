import numpy as np
import pytest

from manifold_rewiring.graph import Graph, knn_graph
from manifold_rewiring.mlp import forward, init_params, zero_params
from manifold_rewiring.rewiring import (
    LinkScorer,
    RewireReport,
    iterative_rewire,
    read_report_csv,
    select_trustworthy,
    threshold_denoise,
    write_report_csv,
)
from manifold_rewiring.walk import scale_features, walk_features_many


def constant_scorer(h, value):
    p = zero_params(2 * (2 * h - 1))
    p.layers[-1].bias[:] = 50.0 if value else -50.0
    return p


def plus2_scorer(h, cut):
    """Score rises with the common-neighbor count (first feature)."""
    p = zero_params(2 * (2 * h - 1), hidden=(1,))
    p.layers[0].weight[0, 0] = 1.0
    p.layers[1].weight[0, 0] = 20.0
    p.layers[1].bias[0] = -20.0 * np.log1p(cut)
    return p


@pytest.fixture
def noisy(rng):
    return knn_graph(rng.standard_normal((120, 2)), 6)


def test_threshold_constant_one_keeps_graph(noisy):
    out, rep = threshold_denoise(noisy, constant_scorer(2, 1), 2)
    assert out == noisy and rep.removed_edges == []


def test_threshold_constant_zero_empties_graph(noisy):
    out, rep = threshold_denoise(noisy, constant_scorer(2, 0), 2)
    assert out.n_vertices == 0 and out.n_edges == 0
    assert len(rep.removed_edges) == noisy.n_edges


def test_threshold_matches_direct_scores(noisy):
    p = init_params(6, rng_seed=3)
    pairs = noisy.edge_array()
    scores = forward(p, scale_features(walk_features_many(noisy, pairs, 2)))
    tau = float(np.median(scores))
    out, rep = threshold_denoise(noisy, p, 2, tau)
    assert {tuple(e) for e in pairs[scores < tau].tolist()} == set(rep.removed_edges)
    assert out.edges == noisy.edges - set(rep.removed_edges)


def test_iterative_constant_one_single_iteration(noisy):
    out, rep = iterative_rewire(noisy, constant_scorer(2, 1), 2)
    assert rep.iterations == 1 and rep.removals_per_iteration == [0]
    assert out == noisy and rep.converged


@pytest.mark.parametrize("mode", ["sequential", "batch"])
def test_iterative_invariants(noisy, mode):
    p = plus2_scorer(2, 2)
    out, rep = iterative_rewire(noisy, p, 2, rng_seed=1, mode=mode)
    assert out.edges <= noisy.edges
    assert set(out.vertex_ids.tolist()) <= set(noisy.vertex_ids.tolist())
    assert sum(rep.removals_per_iteration) == len(rep.removed_edges)
    assert len(set(rep.removed_edges)) == len(rep.removed_edges)
    assert all(a >= b for a, b in zip(rep.edge_counts, rep.edge_counts[1:]))
    assert rep.iterations <= min(2000, noisy.n_edges + 1)
    assert rep.converged
    assert out.edges == noisy.edges - set(rep.removed_edges)
    assert np.all(out.degrees() > 0)
    assert sum(rep.final_degree_histogram.values()) == out.n_vertices


def test_iterative_deterministic(noisy):
    p = plus2_scorer(2, 2)
    a = iterative_rewire(noisy, p, 2, rng_seed=5)
    b = iterative_rewire(noisy, p, 2, rng_seed=5)
    assert a[0] == b[0] and a[1].removed_edges == b[1].removed_edges


def test_iterative_max_iters_cap(noisy):
    out, rep = iterative_rewire(noisy, constant_scorer(2, 0), 2, max_iters=2)
    assert rep.iterations == 2 and not rep.converged


def test_iterative_bad_args(noisy):
    with pytest.raises(ValueError):
        iterative_rewire(noisy, constant_scorer(2, 1), 2, max_iters=0)
    with pytest.raises(ValueError):
        iterative_rewire(noisy, constant_scorer(2, 1), 2, mode="parallel")


def test_removes_edges_without_common_neighbors():
    # two triangles sharing vertex 2 plus a pendant edge; only the pendant
    # edge has no common neighbor
    g = Graph(range(6), [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (2, 4), (4, 5)])
    out, rep = iterative_rewire(g, plus2_scorer(2, 1), 2, rng_seed=0)
    assert (4, 5) in rep.removed_edges
    assert 5 not in out
    assert out.edges == {(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (2, 4)}


def test_scorer_width_check():
    with pytest.raises(ValueError):
        LinkScorer(init_params(6), 3)


def test_scorer_score_edges_matches_forward(noisy):
    p = init_params(6, rng_seed=8)
    s = LinkScorer(p, 2).score_edges(noisy)
    assert s.shape == (noisy.n_edges,) and np.all((s > 0) & (s < 1))


def test_every_edge_on_a_triangle_is_kept():
    g = Graph(range(4), [(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)])
    out, rep = iterative_rewire(g, plus2_scorer(2, 1), 2, rng_seed=0)
    assert rep.removed_edges == [] and out == g


def test_removal_changes_later_scores():
    # K4 minus one edge with a two-common-neighbor cut: only the chord (0, 2)
    # passes at first; it fails once the cycle edges around it are gone
    g = Graph(range(4), [(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)])
    out, rep = iterative_rewire(g, plus2_scorer(2, 2), 2, rng_seed=0)
    assert rep.iterations >= 2
    assert out.n_edges == 0


def test_trustworthy_example():
    g = Graph(range(6), [(0, 1), (0, 2), (0, 3), (2, 4), (4, 5)])
    # degrees: 0:3, 1:1, 2:2, 3:1, 4:2, 5:1
    assert select_trustworthy(g, 2) == [0, 2]
    assert select_trustworthy(g, 3) == [0, 2, 4]
    assert sorted(select_trustworthy(g, 10)) == list(range(6))


def test_trustworthy_invalid():
    with pytest.raises(ValueError):
        select_trustworthy(Graph(range(2), [(0, 1)]), 0)


def test_report_csv_round_trip(tmp_path):
    rep = RewireReport([3, 1, 0], {1: 4, 3: 2}, [(0, 1), (2, 3), (4, 5), (1, 2)], 3)
    write_report_csv(rep, tmp_path / "r.csv", tmp_path / "d.csv")
    assert (tmp_path / "r.csv").read_text() == "iteration,removed\n1,3\n2,1\n3,0\n"
    assert (tmp_path / "d.csv").read_text() == "degree,count\n1,4\n3,2\n"
    back = read_report_csv(tmp_path / "r.csv", tmp_path / "d.csv")
    assert back.removals_per_iteration == [3, 1, 0] and back.final_degree_histogram == {1: 4, 3: 2}
