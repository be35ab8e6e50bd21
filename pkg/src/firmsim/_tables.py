"""Per-step lookup tables for destination choice.

Within a step every division of a type faces the same frozen utility
surface, so everything a destination decision needs except the division's own
cell and its pick draw can be computed once per type:

argmax mode
    best utility among occupied cells and among vacant cells, plus the cells
    tying at that best value. Excluding the mover's own cell never changes the
    outcome: if the own cell ties the best occupied value, no candidate is a
    strict improvement.
logit mode
    cumulative logit weights over occupied and vacant cells. Sampling an
    occupied cell other than one's own is an inverse-CDF draw that skips the
    own cell's interval. A mover sitting on the unique utility maximum gets a
    separately normalised CDF, so its candidates cannot all underflow to zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SelectionMode

ARGMAX = 0
LOGIT = 1

_I32 = np.int32


@dataclass
class RelocationTables:
    mode: int
    util: np.ndarray        # (2, cells) float64
    n_occ: int
    n_vac: int
    ex_max: np.ndarray      # (2,)
    ex_ties: np.ndarray     # (2, L) int32
    ex_nties: np.ndarray    # (2,) int64
    va_max: np.ndarray
    va_ties: np.ndarray
    va_nties: np.ndarray
    occ: np.ndarray         # (n_occ,) int32, ascending
    pos: np.ndarray         # (cells,) int32, index into occ or -1
    ex_cdf: np.ndarray      # (2, n_occ)
    kstar: np.ndarray       # (2,) int32, unique argmax occupied cell or -1
    ex2_cells: np.ndarray   # (2, max(n_occ - 1, 0)) int32
    ex2_cdf: np.ndarray
    vac: np.ndarray         # (n_vac,) int32, ascending
    va_cdf: np.ndarray      # (2, n_vac)


def _padded(rows, dtype):
    width = max((len(r) for r in rows), default=0)
    out = np.zeros((len(rows), max(width, 1)), dtype=dtype)
    for i, r in enumerate(rows):
        out[i, : len(r)] = r
    return out


def _cdf(u: np.ndarray) -> np.ndarray:
    if u.size == 0:
        return np.zeros(0)
    return np.cumsum(np.exp(u - u.max()))


def build_tables(count_total: np.ndarray, util: np.ndarray, mode: SelectionMode) -> RelocationTables:
    count_total = np.asarray(count_total).reshape(-1)
    util = np.ascontiguousarray(util, dtype=np.float64)
    cells = count_total.shape[0]
    occ = np.flatnonzero(count_total > 0).astype(_I32)
    vac = np.flatnonzero(count_total == 0).astype(_I32)
    n_occ, n_vac = occ.size, vac.size
    empty_f = np.zeros((2, 1))
    empty_i = np.zeros((2, 1), dtype=_I32)

    t = RelocationTables(
        mode=ARGMAX if SelectionMode(mode) == SelectionMode.ARGMAX_IMPROVE else LOGIT,
        util=util, n_occ=n_occ, n_vac=n_vac,
        ex_max=np.zeros(2), ex_ties=empty_i, ex_nties=np.zeros(2, dtype=np.int64),
        va_max=np.zeros(2), va_ties=empty_i, va_nties=np.zeros(2, dtype=np.int64),
        occ=occ, pos=np.full(cells, -1, dtype=_I32),
        ex_cdf=empty_f, kstar=np.full(2, -1, dtype=_I32),
        ex2_cells=empty_i, ex2_cdf=empty_f, vac=vac, va_cdf=empty_f,
    )
    t.pos[occ] = np.arange(n_occ, dtype=_I32)

    if t.mode == ARGMAX:
        ex_rows, va_rows = [], []
        for k in range(2):
            uo, uv = util[k, occ], util[k, vac]
            if n_occ:
                t.ex_max[k] = uo.max()
                ex_rows.append(occ[uo == t.ex_max[k]])
            else:
                ex_rows.append(occ[:0])
            if n_vac:
                t.va_max[k] = uv.max()
                va_rows.append(vac[uv == t.va_max[k]])
            else:
                va_rows.append(vac[:0])
        t.ex_ties = _padded(ex_rows, _I32)
        t.ex_nties = np.array([len(r) for r in ex_rows], dtype=np.int64)
        t.va_ties = _padded(va_rows, _I32)
        t.va_nties = np.array([len(r) for r in va_rows], dtype=np.int64)
        return t

    ex_cdf, ex2_cells, ex2_cdf, va_cdf = [], [], [], []
    for k in range(2):
        uo = util[k, occ]
        ex_cdf.append(_cdf(uo))
        va_cdf.append(_cdf(util[k, vac]))
        if n_occ:
            top = np.flatnonzero(uo == uo.max())
            if top.size == 1:
                t.kstar[k] = occ[top[0]]
                ex2_cells.append(np.delete(occ, top[0]))
                ex2_cdf.append(_cdf(np.delete(uo, top[0])))
                continue
        ex2_cells.append(occ[:0])
        ex2_cdf.append(np.zeros(0))
    t.ex_cdf = _padded(ex_cdf, np.float64)
    t.ex2_cells = _padded(ex2_cells, _I32)
    t.ex2_cdf = _padded(ex2_cdf, np.float64)
    t.va_cdf = _padded(va_cdf, np.float64)
    return t
