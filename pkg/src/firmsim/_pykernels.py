"""Pure numpy implementation of the per-division kernels.

Mirrors ``_ckernels.pyx`` operation for operation (same draws, same
float expressions, same search semantics) so both backends produce
identical runs. Work is chunked to bound temporary memory.
"""
from __future__ import annotations

import numpy as np

from . import rng
from ._tables import ARGMAX, RelocationTables

BACKEND = "python"
CHUNK = 1 << 20


def spinoffs(dtype, size, cell, n, d_old, d_new, phi, key, count_old, count_new):
    """Split every division past its maximum size; children are written to
    slots ``n, n+1, ...`` in ascending parent order. Arrays must have room
    for ``2 * n`` divisions. Returns ``(children, from_old, from_new)``."""
    t = dtype[:n]
    s = size[:n]
    is_old = t == 0
    parents = []
    child_types = []
    for start in range(0, n, CHUNK):
        stop = min(n, start + CHUNK)
        old_c = is_old[start:stop]
        s_c = s[start:stop]
        over_old = old_c & (s_c > d_old)
        over_new = ~old_c & (s_c > d_new)
        child_new = over_new.copy()
        if phi > 0:
            at = np.flatnonzero(old_c & (s_c == d_old))
            if at.size:
                u = rng.uniforms(key, at + start)
                fire = at[u < phi]
                over_old[fire] = True  # marks a split; type fixed below
                child_new[fire] = True
        split = over_old | over_new
        idx = np.flatnonzero(split)
        parents.append(idx + start)
        child_types.append(child_new[idx].astype(np.uint8))
    parents = np.concatenate(parents) if parents else np.zeros(0, dtype=np.int64)
    ctypes = np.concatenate(child_types) if child_types else np.zeros(0, dtype=np.uint8)
    k = parents.size
    if k == 0:
        return 0, 0, 0
    from_old = int(np.count_nonzero(t[parents] == 0))
    size[parents] = 0
    dtype[n : n + k] = ctypes
    size[n : n + k] = 0
    pcell = cell[parents]
    cell[n : n + k] = pcell
    cells = count_old.shape[0]
    count_new += np.bincount(pcell[ctypes == 1], minlength=cells)
    count_old += np.bincount(pcell[ctypes == 0], minlength=cells)
    return k, from_old, k - from_old


def _sample(cdf, length, x):
    idx = np.searchsorted(cdf[:length], x, side="right")
    over = idx >= length
    if np.any(over):
        idx[over] = np.searchsorted(cdf[:length], cdf[length - 1], side="left")
    return idx


def _pick(v, n):
    return np.minimum((v * n).astype(np.int64), n - 1)


def _decide_existing(tb: RelocationTables, k, c, v):
    """Destinations for EvaluateExisting movers of type ``k``; -1 = stay,
    -2 = no candidates."""
    out = np.full(c.shape[0], -1, dtype=np.int64)
    if tb.n_occ <= 1:
        out[:] = -2
        return out
    if tb.mode == ARGMAX:
        better = tb.util[k, c] < tb.ex_max[k]
        nt = int(tb.ex_nties[k])
        out[better] = tb.ex_ties[k, _pick(v[better], nt)]
        return out
    L = tb.n_occ
    C = tb.ex_cdf[k, :L]
    on_top = c == tb.kstar[k]
    if np.any(on_top):
        C2 = tb.ex2_cdf[k, : L - 1]
        idx = _sample(C2, L - 1, v[on_top] * C2[L - 2])
        out[on_top] = tb.ex2_cells[k, idx]
    rest = ~on_top
    if np.any(rest):
        kk = tb.pos[c[rest]].astype(np.int64)
        E = np.where(kk > 0, C[np.maximum(kk - 1, 0)], 0.0)
        wk = C[kk] - E
        total = C[L - 1] - wk
        x0 = v[rest] * total
        low = x0 < E
        idx = np.empty(kk.shape[0], dtype=np.int64)
        if np.any(low):
            idx[low] = _sample(C, L, x0[low])
        high = ~low
        if np.any(high):
            x = C[kk[high]] + (x0[high] - E[high])
            ih = np.searchsorted(C, x, side="right")
            ih[ih >= L] = np.searchsorted(C, C[L - 1], side="left")
            same = ih == kk[high]
            if np.any(same):
                ih[same] = np.searchsorted(C, E[high][same], side="left")
            idx[high] = ih
        out[rest] = tb.occ[idx]
    return out


def _decide_vacant(tb: RelocationTables, k, c, v):
    out = np.full(c.shape[0], -1, dtype=np.int64)
    if tb.n_vac == 0:
        out[:] = -2
        return out
    if tb.mode == ARGMAX:
        better = tb.va_max[k] > tb.util[k, c]
        nt = int(tb.va_nties[k])
        out[better] = tb.va_ties[k, _pick(v[better], nt)]
        return out
    V = tb.n_vac
    C = tb.va_cdf[k, :V]
    out[:] = tb.vac[_sample(C, V, v * C[V - 1])]
    return out


def relocate(dtype, cell, n, lam1, lam12, key_class, key_pick, tables, count_old, count_new):
    """Relocation decisions for divisions ``0..n-1`` against frozen tables;
    moves are written into ``cell`` and the census counts.
    Returns ``(stays, moves_existing, moves_vacant, no_candidates)``."""
    n_stay = n_ex = n_va = n_none = 0
    cells = count_old.shape[0]
    for start in range(0, n, CHUNK):
        stop = min(n, start + CHUNK)
        u = rng.uniform_range(key_class, start, stop)
        cls = (u >= lam1).astype(np.int8) + (u >= lam12).astype(np.int8)
        movers = np.flatnonzero(cls)
        n_stay += (stop - start) - movers.size
        if movers.size == 0:
            continue
        ids = movers + start
        v = rng.uniforms(key_pick, ids)
        mcls = cls[movers]
        mt = dtype[ids]
        src = cell[ids].astype(np.int64)
        dest = np.empty(ids.shape[0], dtype=np.int64)
        for k in (0, 1):
            for which, decide in ((1, _decide_existing), (2, _decide_vacant)):
                sel = (mt == k) & (mcls == which)
                if np.any(sel):
                    dest[sel] = decide(tables, k, src[sel], v[sel])
        moved = dest >= 0
        n_none += int(np.count_nonzero(dest == -2))
        n_stay += int(np.count_nonzero(dest == -1))
        n_ex += int(np.count_nonzero(moved & (mcls == 1)))
        n_va += int(np.count_nonzero(moved & (mcls == 2)))
        mids = ids[moved]
        cell[mids] = dest[moved]
        for k, counts in ((0, count_old), (1, count_new)):
            sel = mt[moved] == k
            counts -= np.bincount(src[moved][sel], minlength=cells)
            counts += np.bincount(dest[moved][sel], minlength=cells)
    return n_stay, n_ex, n_va, n_none
