"""Walk-pooling link features and labeled training sets.

For a candidate pair ``e`` the feature matrix has two rows: walk counts
between the endpoints inside the enclosing subgraph with ``e`` forced present
(row 0) and forced absent (row 1). Column ``j`` holds walks of length
``j + 2``, so ``h`` hops give ``2h - 1`` columns.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .graph import INT64_MAX, Graph, walk_count_bound


@dataclass(frozen=True)
class WalkFeatureMatrix:
    values: np.ndarray
    h: int
    edge: tuple[int, int]


@dataclass(frozen=True)
class LabeledExample:
    features: WalkFeatureMatrix
    label: int


def n_features(h: int) -> int:
    return 2 * (2 * h - 1)


def scale_features(raw) -> np.ndarray:
    """Flatten raw counts row-major and compress with ``log1p``.

    Accepts one ``(2, 2h-1)`` matrix or a stack of them.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim == 2:
        return np.log1p(raw.reshape(1, -1))
    return np.log1p(raw.reshape(len(raw), -1))


def unscale_features(scaled, h: int) -> np.ndarray:
    scaled = np.asarray(scaled, dtype=np.float64)
    return np.expm1(scaled).reshape(-1, 2, 2 * h - 1)


def check_walk_range(max_degree: int, h: int) -> None:
    # +1 covers the focus edge forced into the plus row
    if walk_count_bound(max_degree + 1, 2 * h) > INT64_MAX:
        raise OverflowError(
            f"walk counts up to length {2 * h} with degree {max_degree} may overflow int64"
        )


def walk_features_local(indptr, indices, alive, pairs, h, threads=1, backend=None) -> np.ndarray:
    """Raw feature stack for pairs given as local CSR indices."""
    if h < 1:
        raise ValueError("h must be positive")
    degrees = np.diff(indptr)
    check_walk_range(int(degrees.max()) if len(degrees) else 0, h)
    return kernels.walk_features_batch(indptr, indices, alive, pairs, h,
                                       threads=threads, backend=backend)


def walk_features_many(g: Graph, pairs, h: int, threads=1, backend=None) -> np.ndarray:
    """Raw ``(P, 2, 2h-1)`` counts for pairs given in external vertex ids."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    local = np.array([[g.index_of(a), g.index_of(b)] for a, b in pairs.tolist()],
                     dtype=np.int64).reshape(-1, 2)
    if len(pairs) and (pairs[:, 0] == pairs[:, 1]).any():
        raise ValueError("focus pair must join two distinct vertices")
    indptr, indices = g.csr()
    return walk_features_local(indptr, indices, None, local, h, threads=threads, backend=backend)


def compute_walk_features(g: Graph, e: tuple[int, int], h: int, backend=None) -> WalkFeatureMatrix:
    values = walk_features_many(g, [e], h, backend=backend)[0]
    return WalkFeatureMatrix(values, h, (int(e[0]), int(e[1])))


# --------------------------------------------------------------------------
# training sets

@dataclass
class TrainingSet:
    """Array-backed list of labeled examples (raw counts, not scaled)."""

    pairs: np.ndarray
    raw: np.ndarray
    labels: np.ndarray
    h: int

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, k) -> LabeledExample:
        pair = (int(self.pairs[k, 0]), int(self.pairs[k, 1]))
        return LabeledExample(WalkFeatureMatrix(self.raw[k], self.h, pair), int(self.labels[k]))

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    @property
    def X(self) -> np.ndarray:
        return scale_features(self.raw)


def sample_non_edges(g: Graph, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` distinct uniformly random non-adjacent vertex pairs."""
    ids = g.vertex_ids
    n = len(ids)
    available = n * (n - 1) // 2 - g.n_edges
    if count > available:
        raise ValueError(
            f"graph too dense: need {count} negative pairs, only {available} non-edges exist"
        )
    chosen: dict[tuple[int, int], None] = {}
    if count > available // 2:
        # dense regime: enumerate and draw without replacement
        iu, ju = np.triu_indices(n, 1)
        cand = [(int(ids[a]), int(ids[b])) for a, b in zip(iu, ju)
                if (int(ids[a]), int(ids[b])) not in g.edges]
        pick = rng.choice(len(cand), size=count, replace=False)
        return np.array([cand[p] for p in pick], dtype=np.int64).reshape(-1, 2)
    while len(chosen) < count:
        a = rng.integers(0, n, size=2 * (count - len(chosen)) + 8)
        b = rng.integers(0, n, size=len(a))
        for x, y in zip(a.tolist(), b.tolist()):
            if x == y:
                continue
            pair = (int(ids[min(x, y)]), int(ids[max(x, y)]))
            if pair in g.edges or pair in chosen:
                continue
            chosen[pair] = None
            if len(chosen) == count:
                break
    return np.array(list(chosen), dtype=np.int64).reshape(-1, 2)


def build_training_set(target: Graph, h: int, rng_seed=0, threads=1) -> TrainingSet:
    """One positive per target edge plus as many random non-edges, shuffled."""
    if target.n_edges < 1:
        raise ValueError("target graph has no edges")
    rng = np.random.default_rng(rng_seed)
    pos = target.edge_array()
    neg = sample_non_edges(target, len(pos), rng)
    pairs = np.concatenate([pos, neg])
    labels = np.concatenate([np.ones(len(pos), np.int64), np.zeros(len(neg), np.int64)])
    raw = walk_features_many(target, pairs, h, threads=threads)
    perm = rng.permutation(len(pairs))
    return TrainingSet(pairs[perm], raw[perm], labels[perm], h)


# --------------------------------------------------------------------------
# CSV

def _feature_header(h):
    cols = [f"plus_{k}" for k in range(2, 2 * h + 1)]
    return cols + [c.replace("plus", "minus") for c in cols]


def write_training_csv(ts: TrainingSet, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["label", *_feature_header(ts.h)])
        flat = ts.raw.reshape(len(ts), -1)
        for lab, row in zip(ts.labels.tolist(), flat.tolist()):
            w.writerow([lab, *row])


def read_training_csv(path) -> TrainingSet:
    with open(Path(path), newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    header, body = rows[0], rows[1:]
    width = len(header) - 1
    h = (width // 2 + 1) // 2
    if header[0] != "label" or n_features(h) != width:
        raise ValueError(f"{path}: unexpected header {header}")
    labels = np.array([int(r[0]) for r in body], dtype=np.int64)
    raw = np.array([[int(v) for v in r[1:]] for r in body], dtype=np.int64).reshape(-1, 2, 2 * h - 1)
    pairs = np.full((len(body), 2), -1, dtype=np.int64)
    return TrainingSet(pairs, raw, labels, h)
