# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-division kernels; see ``_pykernels.py`` for the reference
semantics this module reproduces exactly."""

import numpy as np
from libc.stdint cimport uint8_t, uint16_t, int32_t, int64_t, uint64_t

BACKEND = "cython"

cdef uint64_t GAMMA = 0x9E3779B97F4A7C15ULL
cdef double TO_UNIT = 1.0 / 9007199254740992.0
cdef Py_ssize_t CHUNK = 1 << 16


cdef inline double unif(uint64_t key, uint64_t i) noexcept nogil:
    cdef uint64_t z = key + (i + 1) * GAMMA
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    z = z ^ (z >> 31)
    return <double>(z >> 11) * TO_UNIT


cdef inline Py_ssize_t bisect_right(const double[::1] a, Py_ssize_t n, double x) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if x < a[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


cdef inline Py_ssize_t bisect_left(const double[::1] a, Py_ssize_t n, double x) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef inline Py_ssize_t sample(const double[::1] cdf, Py_ssize_t n, double x) noexcept nogil:
    cdef Py_ssize_t idx = bisect_right(cdf, n, x)
    if idx >= n:
        idx = bisect_left(cdf, n, cdf[n - 1])
    return idx


cdef inline Py_ssize_t pick(double v, int64_t n) noexcept nogil:
    cdef int64_t i = <int64_t>(v * n)
    if i > n - 1:
        i = n - 1
    return i


def spinoffs(uint8_t[::1] dtype, uint16_t[::1] size, int32_t[::1] cell, Py_ssize_t n,
             int d_old, int d_new, double phi, uint64_t key,
             int64_t[::1] count_old, int64_t[::1] count_new):
    cdef Py_ssize_t i, j, k = 0
    cdef Py_ssize_t from_old = 0
    cdef uint8_t t, child
    cdef uint16_t s
    if dtype.shape[0] < 2 * n or size.shape[0] < 2 * n or cell.shape[0] < 2 * n:
        raise ValueError("population arrays need room for 2*n divisions")
    with nogil:
        for i in range(n):
            t = dtype[i]
            s = size[i]
            if t == 0:
                if s > d_old:
                    child = 0
                elif s == d_old and phi > 0 and unif(key, i) < phi:
                    child = 1
                else:
                    continue
                from_old += 1
            else:
                if s > d_new:
                    child = 1
                else:
                    continue
            size[i] = 0
            j = n + k
            dtype[j] = child
            size[j] = 0
            cell[j] = cell[i]
            if child == 0:
                count_old[cell[i]] += 1
            else:
                count_new[cell[i]] += 1
            k += 1
    return k, from_old, k - from_old


cdef struct Counters:
    Py_ssize_t stay, ex, va, none


def relocate(uint8_t[::1] dtype, int32_t[::1] cell, Py_ssize_t n,
             double lam1, double lam12, uint64_t key_class, uint64_t key_pick,
             tables, int64_t[::1] count_old, int64_t[::1] count_new):
    cdef int mode = tables.mode
    cdef const double[:, ::1] util = tables.util
    cdef Py_ssize_t n_occ = tables.n_occ, n_vac = tables.n_vac
    cdef const double[::1] ex_max = tables.ex_max
    cdef const int32_t[:, ::1] ex_ties = tables.ex_ties
    cdef const int64_t[::1] ex_nties = tables.ex_nties
    cdef const double[::1] va_max = tables.va_max
    cdef const int32_t[:, ::1] va_ties = tables.va_ties
    cdef const int64_t[::1] va_nties = tables.va_nties
    cdef const int32_t[::1] occ = tables.occ
    cdef const int32_t[::1] pos = tables.pos
    cdef const double[:, ::1] ex_cdf = tables.ex_cdf
    cdef const int32_t[::1] kstar = tables.kstar
    cdef const int32_t[:, ::1] ex2_cells = tables.ex2_cells
    cdef const double[:, ::1] ex2_cdf = tables.ex2_cdf
    cdef const int32_t[::1] vac = tables.vac
    cdef const double[:, ::1] va_cdf = tables.va_cdf

    cdef Counters cnt
    cnt.stay = 0
    cnt.ex = 0
    cnt.va = 0
    cnt.none = 0
    cdef Py_ssize_t i, kk, idx, L
    cdef int t, which
    cdef int32_t c, dest
    cdef double u, v, E, wk, total, x0, x
    cdef const double[::1] C
    cdef const double[::1] C2

    cdef Py_ssize_t start, stop, m, j, nm
    cdef int64_t[::1] buf = np.empty(CHUNK, dtype=np.int64)
    cdef uint8_t[::1] bcls = np.empty(CHUNK, dtype=np.uint8)

    with nogil:
        start = 0
        while start < n:
            stop = start + CHUNK
            if stop > n:
                stop = n
            # branchless compaction of movers; the stay test is unpredictable
            m = 0
            for i in range(start, stop):
                u = unif(key_class, i)
                buf[m] = i
                bcls[m] = 1 + (u >= lam12)
                m += u >= lam1
            cnt.stay += (stop - start) - m
            nm = m
            for j in range(nm):
                i = buf[j]
                which = bcls[j]
                v = unif(key_pick, i)
                t = dtype[i]
                c = cell[i]
                dest = -1
                if which == 1:
                    if n_occ <= 1:
                        cnt.none += 1
                        continue
                    if mode == 0:
                        if util[t, c] < ex_max[t]:
                            dest = ex_ties[t, pick(v, ex_nties[t])]
                    else:
                        L = n_occ
                        if c == kstar[t]:
                            C2 = ex2_cdf[t]
                            idx = sample(C2, L - 1, v * C2[L - 2])
                            dest = ex2_cells[t, idx]
                        else:
                            C = ex_cdf[t]
                            kk = pos[c]
                            E = C[kk - 1] if kk > 0 else 0.0
                            wk = C[kk] - E
                            total = C[L - 1] - wk
                            x0 = v * total
                            if x0 < E:
                                idx = sample(C, L, x0)
                            else:
                                x = C[kk] + (x0 - E)
                                idx = bisect_right(C, L, x)
                                if idx >= L:
                                    idx = bisect_left(C, L, C[L - 1])
                                if idx == kk:
                                    idx = bisect_left(C, L, E)
                            dest = occ[idx]
                else:
                    if n_vac == 0:
                        cnt.none += 1
                        continue
                    if mode == 0:
                        if va_max[t] > util[t, c]:
                            dest = va_ties[t, pick(v, va_nties[t])]
                    else:
                        C = va_cdf[t]
                        dest = vac[sample(C, n_vac, v * C[n_vac - 1])]
                if dest < 0:
                    cnt.stay += 1
                    continue
                if which == 1:
                    cnt.ex += 1
                else:
                    cnt.va += 1
                cell[i] = dest
                if t == 0:
                    count_old[c] -= 1
                    count_old[dest] += 1
                else:
                    count_new[c] -= 1
                    count_new[dest] += 1
            start = stop
    return cnt.stay, cnt.ex, cnt.va, cnt.none
