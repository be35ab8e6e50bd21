import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from firmsim.config import CellId
from firmsim.metrics import (
    DegenerateInput, EmptyPopulation, cluster_index, cluster_k, cluster_l,
    disk_offsets, growth_fit, neighbourhood_counts, power_law_fit, rank_size,
)

L_K1_D10 = -9.435810416452244  # sqrt(1/pi) - 10
LN_1_02 = 0.0198026272961797


def brute_k(counts, d):
    pts = [(x, y) for y, x in zip(*np.nonzero(counts)) for _ in range(counts[y, x])]
    n = len(pts)
    pairs = sum(1 for a in pts for b in pts if (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 <= d * d)
    return pairs / n


def test_single_division():
    grid = np.zeros((50, 50), dtype=np.int64)
    grid[20, 30] = 1
    ci = cluster_index(grid)
    assert ci.k_value == 1.0
    assert abs(ci.l_value - L_K1_D10) <= 1e-12
    assert cluster_k(grid, self_inclusive=False) == 0.0


def test_uniform_fill_interior_count():
    # 317 lattice points lie within radius 10 of the origin
    assert len(disk_offsets(10)) == 317
    grid = np.ones((50, 50), dtype=np.int64)
    near = neighbourhood_counts(grid, 10)
    assert near[25, 25] == 317 and near[0, 0] < 317


def test_stacked_city():
    grid = np.zeros((10, 10), dtype=np.int64)
    grid[5, 5] = 40
    assert cluster_k(grid) == 40.0
    assert cluster_k(grid, self_inclusive=False) == 39.0


def test_boundary_distance_is_inclusive():
    grid = np.zeros((1, 12), dtype=np.int64)
    grid[0, 0] = grid[0, 10] = 1
    assert cluster_k(grid, d=10) == 2.0
    assert cluster_k(grid, d=9.999) == 1.0


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(1, 30), st.floats(0.5, 8), st.integers(0, 2**32 - 1))
def test_k_matches_pair_count(w, h, n, d, seed):
    rs = np.random.default_rng(seed)
    grid = np.zeros((h, w), dtype=np.int64)
    np.add.at(grid, (rs.integers(0, h, n), rs.integers(0, w, n)), 1)
    assert cluster_k(grid, d) == brute_k(grid, d)


def test_k_errors():
    with pytest.raises(EmptyPopulation):
        cluster_k(np.zeros((3, 3), dtype=np.int64))
    with pytest.raises(ValueError):
        cluster_k(np.ones((3, 3), dtype=np.int64), d=0)
    with pytest.raises(ValueError):
        cluster_l(-1.0)


def test_rank_size_order_and_ties():
    grid = np.zeros((3, 4), dtype=np.int64)
    grid[2, 1] = 5
    grid[0, 3] = 2
    grid[1, 0] = 2
    assert rank_size(grid) == [(CellId(1, 2), 5), (CellId(3, 0), 2), (CellId(0, 1), 2)]
    assert rank_size(np.zeros((2, 2), dtype=np.int64)) == []


@pytest.mark.parametrize("slope", [-1.0, -0.5, -2.0])
def test_power_law_recovers_planted_slope(slope):
    counts = [1e6 * r ** slope for r in range(1, 51)]
    fit = power_law_fit(counts)
    assert abs(fit.slope - slope) <= 1e-9
    assert fit.r_squared > 1 - 1e-12 and fit.n == 50


def test_power_law_degenerate_inputs():
    with pytest.raises(DegenerateInput):
        power_law_fit([5])
    flat = power_law_fit([3, 3, 3])
    assert flat.degenerate and flat.slope == 0.0 and math.isnan(flat.r_squared)
    with pytest.raises(ValueError):
        power_law_fit([3, 0])


def test_growth_fit_recovers_rate():
    pairs = [(t, 100 * 1.02 ** t) for t in range(0, 211)]
    fit = growth_fit(pairs)
    assert fit.n == 161
    assert abs(fit.slope - LN_1_02) <= 1e-9
    with pytest.raises(DegenerateInput):
        growth_fit(pairs, start=300)


def test_dense_and_sparse_pair_paths_agree(monkeypatch):
    from firmsim import metrics
    grid = np.random.default_rng(4).integers(0, 3, (40, 33))
    assert np.count_nonzero(grid) > metrics.SPARSE_PAIR_LIMIT
    dense = cluster_k(grid, 6.5)
    monkeypatch.setattr(metrics, "SPARSE_PAIR_LIMIT", 10**6)
    assert cluster_k(grid, 6.5) == dense
