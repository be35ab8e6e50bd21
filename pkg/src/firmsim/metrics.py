"""Pattern measurement: cluster index, rank-size distribution, growth fits."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .config import CellId


class EmptyPopulation(ValueError):
    pass


class DegenerateInput(ValueError):
    pass


@dataclass(frozen=True)
class ClusterIndex:
    d: float
    k_value: float
    l_value: float


@dataclass(frozen=True)
class PowerLawFit:
    """OLS line; ``degenerate`` flags a flat series (slope 0, undefined R²)."""

    slope: float
    intercept: float
    r_squared: float
    n: int
    degenerate: bool = False


RankedCities = list  # [(CellId, count), ...] ordered by count desc, then row-major


def disk_offsets(d: float, max_offset: int | None = None) -> list[tuple[int, int]]:
    """Integer offsets ``(dx, dy)`` with ``dx² + dy² <= d²``."""
    r = int(math.floor(d))
    if max_offset is not None:
        r = min(r, max_offset)
    d2 = d * d
    return [
        (dx, dy)
        for dy in range(-r, r + 1)
        for dx in range(-r, r + 1)
        if dx * dx + dy * dy <= d2
    ]


def neighbourhood_counts(counts: np.ndarray, d: float) -> np.ndarray:
    """For each cell, the number of divisions in cells whose centres lie
    within distance ``d`` (closed, own cell included). Exact integer sums."""
    counts = np.asarray(counts, dtype=np.int64)
    h, w = counts.shape
    out = np.zeros_like(counts)
    for dx, dy in disk_offsets(d, max(h, w) - 1):
        if abs(dx) >= w or abs(dy) >= h:
            continue
        # out[y, x] += counts[y + dy, x + dx] where both indices are in range
        ys, yd = (slice(0, h - dy), slice(dy, h)) if dy >= 0 else (slice(-dy, h), slice(0, h + dy))
        xs, xd = (slice(0, w - dx), slice(dx, w)) if dx >= 0 else (slice(-dx, w), slice(0, w + dx))
        out[ys, xs] += counts[yd, xd]
    return out


SPARSE_PAIR_LIMIT = 512  # occupied cells; above this the disk sums are cheaper


def _close_pairs(counts: np.ndarray, d: float) -> int:
    """Ordered pairs of divisions (self pairs included) within distance d."""
    ys, xs = np.nonzero(counts)
    if ys.size <= SPARSE_PAIR_LIMIT:
        c = counts[ys, xs]
        dx = xs[:, None] - xs[None, :]
        dy = ys[:, None] - ys[None, :]
        close = (dx * dx + dy * dy) <= d * d
        return int(c @ (close @ c))
    return int((counts * neighbourhood_counts(counts, d)).sum())


def _grid(census) -> np.ndarray:
    return np.asarray(census.count_total if hasattr(census, "count_total") else census)


def cluster_k(census, d: float = 10.0, self_inclusive: bool = True) -> float:
    """Mean number of divisions within distance ``d`` of a division.

    With ``self_inclusive`` every division counts itself (so K >= 1);
    otherwise it counts only the others, giving exactly ``K - 1``.
    """
    if not d > 0:
        raise ValueError(f"d must be positive, got {d!r}")
    counts = _grid(census).astype(np.int64)
    n = int(counts.sum())
    if n < 1:
        raise EmptyPopulation("cluster index needs at least one division")
    pairs = _close_pairs(counts, d)
    if not self_inclusive:
        pairs -= n
    return pairs / n


def cluster_l(k: float, d: float = 10.0) -> float:
    if k < 0:
        raise ValueError(f"K must be non-negative, got {k!r}")
    return math.sqrt(k / math.pi) - d


def cluster_index(census, d: float = 10.0) -> ClusterIndex:
    k = cluster_k(census, d)
    return ClusterIndex(d, k, cluster_l(k, d))


def rank_size(census) -> RankedCities:
    counts = _grid(census)
    width = counts.shape[1]
    flat = counts.reshape(-1)
    occ = np.flatnonzero(flat > 0)
    order = occ[np.lexsort((occ, -flat[occ]))]
    return [(CellId(int(i % width), int(i // width)), int(flat[i])) for i in order]


def _ols(x: np.ndarray, y: np.ndarray) -> PowerLawFit:
    if x.size < 2 or np.unique(x).size < 2:
        raise DegenerateInput("need at least two distinct x values")
    if np.all(y == y[0]):
        return PowerLawFit(0.0, float(y[0]), math.nan, int(x.size), degenerate=True)
    res = stats.linregress(x, y)
    return PowerLawFit(float(res.slope), float(res.intercept), float(res.rvalue) ** 2, int(x.size))


def power_law_fit(ranked: RankedCities | Sequence[float]) -> PowerLawFit:
    """OLS of log(count) on log(rank), ranks starting at 1."""
    counts = [c[1] if isinstance(c, tuple) else c for c in ranked]
    y = np.asarray(counts, dtype=np.float64)
    if y.size < 2:
        raise DegenerateInput("power-law fit needs at least two cities")
    if np.any(y <= 0):
        raise ValueError("counts must be positive")
    ranks = np.arange(1, y.size + 1, dtype=np.float64)
    return _ols(np.log(ranks), np.log(y))


def growth_fit(reports, start: int = 50, stop: int | None = None) -> PowerLawFit:
    """OLS of log(total divisions) on step over ``start <= step <= stop``.

    ``reports`` is a sequence of step reports (anything with ``step`` and
    ``n_total``) or of ``(step, total)`` pairs. The slope is the continuous
    growth rate per step.
    """
    pts = [(r.step, r.n_total) if hasattr(r, "n_total") else tuple(r) for r in reports]
    pts = [(s, w) for s, w in pts if s >= start and (stop is None or s <= stop)]
    if len(pts) < 2:
        raise DegenerateInput(f"fewer than two steps in window [{start}, {stop}]")
    x = np.array([p[0] for p in pts], dtype=np.float64)
    w = np.array([p[1] for p in pts], dtype=np.float64)
    if np.any(w <= 0):
        raise ValueError("population must be positive in the fit window")
    return _ols(x, np.log(w))
