# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled breadth-first lookahead search.

Stage matrices arrive flattened: ``stage[offsets[n] + i * ncols[n] + j]``
is the slot-n energy of candidate j entered from candidate i.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline double _child_battery(double B, double H, double theta,
                                  double B_up, double B_max) nogil:
    cdef double E, raw
    if B + H >= B_up:
        E = 0.0
    else:
        E = B_up - B
    raw = B + H - theta + E
    if raw < 0:
        return -1.0
    if raw > B_max:
        return B_max
    return raw


def tree_search(const double[::1] stage, const cnp.int64_t[::1] offsets,
                const cnp.int64_t[::1] ncols, const double[::1] harvest,
                double B0, double B_low, double B_up, double B_max):
    cdef Py_ssize_t T = harvest.shape[0]
    cdef Py_ssize_t n, k, j, size, count, K, base, best, node
    cdef double H, theta, Bn, c

    cdef cnp.int64_t[::1] cand = np.zeros(1, dtype=np.int64)
    cdef double[::1] cost = np.zeros(1)
    cdef double[::1] batt = np.full(1, B0)
    cdef cnp.int64_t[::1] first = np.full(1, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] ncand, nfirst, npar
    cdef double[::1] ncost, nbatt
    cand_levels = []
    parent_levels = []
    size = 1
    for n in range(T):
        K = ncols[n]
        H = harvest[n]
        ncand = np.empty(size * K, dtype=np.int64)
        nfirst = np.empty(size * K, dtype=np.int64)
        npar = np.empty(size * K, dtype=np.int64)
        ncost = np.empty(size * K)
        nbatt = np.empty(size * K)
        count = 0
        with nogil:
            for k in range(size):
                base = offsets[n] + cand[k] * K
                for j in range(K):
                    theta = stage[base + j]
                    Bn = _child_battery(batt[k], H, theta, B_up, B_max)
                    if Bn < B_low:
                        continue
                    ncand[count] = j
                    ncost[count] = cost[k] + theta
                    nbatt[count] = Bn
                    if n == 0:
                        nfirst[count] = j
                    else:
                        nfirst[count] = first[k]
                    npar[count] = k
                    count += 1
        if count == 0:
            return -1, float("inf"), []
        cand = ncand[:count]
        cost = ncost[:count]
        batt = nbatt[:count]
        first = nfirst[:count]
        cand_levels.append(cand)
        parent_levels.append(npar[:count])
        size = count

    best = 0
    for k in range(1, size):
        c = cost[k]
        if c < cost[best] or (c == cost[best] and first[k] < first[best]):
            best = k
    path = [0] * T
    node = best
    for n in range(T - 1, -1, -1):
        path[n] = int(cand_levels[n][node])
        node = parent_levels[n][node]
    return int(first[best]), float(cost[best]), path
