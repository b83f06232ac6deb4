"""Pure-Python walk-feature kernel; used when the compiled one is unavailable."""
from collections import deque

import numpy as np


def _one(indptr, indices, alive, u, v, h, out):
    depth = {u: 0, v: 0}
    ball = [u, v]
    queue = deque(ball)
    while queue:
        a = queue.popleft()
        if depth[a] == h:
            continue
        for p in range(indptr[a], indptr[a + 1]):
            if not alive[p]:
                continue
            b = indices[p]
            if b in depth:
                continue
            depth[b] = depth[a] + 1
            ball.append(b)
            queue.append(b)
    local = {g: k for k, g in enumerate(ball)}
    nbrs = []
    for k, g in enumerate(ball):
        row = []
        for p in range(indptr[g], indptr[g + 1]):
            if not alive[p]:
                continue
            b = local.get(indices[p])
            if b is None or (k < 2 and b < 2):
                continue
            row.append(b)
        nbrs.append(row)
    n = len(ball)
    for r, plus in ((0, True), (1, False)):
        x = [0] * n
        x[0] = 1
        for k in range(1, 2 * h + 1):
            y = [sum(x[b] for b in row) for row in nbrs]
            if plus:
                y[0] += x[1]
                y[1] += x[0]
            x = y
            if k >= 2:
                out[r, k - 2] = x[1]


def walk_features_batch(indptr, indices, alive, pairs, h):
    indptr = indptr.tolist()
    indices = indices.tolist()
    alive = alive.tolist()
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    out = np.zeros((len(pairs), 2, 2 * h - 1), dtype=np.int64)
    for t, (u, v) in enumerate(pairs.tolist()):
        _one(indptr, indices, alive, u, v, h, out[t])
    return out
