# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled walk-feature kernel over a CSR graph with per-slot liveness flags."""
import numpy as np
from libc.stdint cimport int64_t, uint8_t


cdef void _one(const int64_t[::1] indptr, const int64_t[::1] indices,
               const uint8_t[::1] alive, int64_t u, int64_t v, int h,
               int64_t[::1] local, int64_t[::1] ball, int64_t[::1] depth,
               int64_t[::1] x, int64_t[::1] y, int64_t[:, ::1] out) noexcept nogil:
    cdef int64_t nb = 2, head = 0, a, b, g, p, k, s, r
    ball[0] = u
    ball[1] = v
    local[u] = 0
    local[v] = 1
    depth[0] = 0
    depth[1] = 0
    while head < nb:
        a = ball[head]
        if depth[head] < h:
            for p in range(indptr[a], indptr[a + 1]):
                if alive[p] == 0:
                    continue
                b = indices[p]
                if local[b] >= 0:
                    continue
                local[b] = nb
                ball[nb] = b
                depth[nb] = depth[head] + 1
                nb += 1
        head += 1

    for r in range(2):
        for a in range(nb):
            x[a] = 0
        x[0] = 1
        for k in range(1, 2 * h + 1):
            for a in range(nb):
                g = ball[a]
                s = 0
                for p in range(indptr[g], indptr[g + 1]):
                    if alive[p] == 0:
                        continue
                    b = local[indices[p]]
                    if b < 0 or (a < 2 and b < 2):
                        continue
                    s += x[b]
                y[a] = s
            if r == 0:
                y[0] += x[1]
                y[1] += x[0]
            for a in range(nb):
                x[a] = y[a]
            if k >= 2:
                out[r, k - 2] = x[1]

    for a in range(nb):
        local[ball[a]] = -1


def walk_features_batch(const int64_t[::1] indptr, const int64_t[::1] indices,
                        const uint8_t[::1] alive, pairs, int h):
    cdef int64_t n = indptr.shape[0] - 1
    cdef int64_t[:, ::1] pr = np.ascontiguousarray(pairs, dtype=np.int64).reshape(-1, 2)
    cdef int64_t m = pr.shape[0], t
    out_arr = np.zeros((m, 2, 2 * h - 1), dtype=np.int64)
    cdef int64_t[:, :, ::1] out = out_arr
    cdef int64_t[::1] local = np.full(n, -1, dtype=np.int64)
    cdef int64_t[::1] ball = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] depth = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] x = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] y = np.empty(n, dtype=np.int64)
    with nogil:
        for t in range(m):
            _one(indptr, indices, alive, pr[t, 0], pr[t, 1], h,
                 local, ball, depth, x, y, out[t])
    return out_arr
