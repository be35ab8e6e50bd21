import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from firmsim.config import DivisionType, SimConfig, TypeParams
from firmsim.fields import (
    DimensionMismatch, EmptyCandidateSet, GridTooLarge, build_decay_kernel,
    build_kernel_set, potential_field, relocation_probabilities, utility_field,
    utility_pair,
)
from firmsim.state import new_simulation

EXP_MINUS_2_5 = 0.0820849986238988  # exp(-2.5), 16 digits
SOFTMAX_1_0 = (0.7310585786300049, 0.2689414213699951)


def brute_potential(counts, alpha):
    h, w = counts.shape
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            s = 0.0
            for yy in range(h):
                for xx in range(w):
                    s += counts[yy, xx] * math.exp(-alpha * math.hypot(x - xx, y - yy))
            out[y, x] = s
    return out


def test_kernel_weights():
    k = build_decay_kernel(50, 50, 0.5)
    assert k.weight((0, 0), (0, 0)) == 1.0
    assert abs(k.weight((0, 0), (3, 4)) - EXP_MINUS_2_5) <= 1e-15
    assert abs(k.weight((3, 4), (0, 0)) - k.weight((0, 0), (3, 4))) == 0.0
    assert np.all(k.weights > 0) and not k.weights.flags.writeable


def test_single_division_field():
    counts = np.zeros((50, 50), dtype=np.int64)
    counts[0, 0] = 1
    f = potential_field(counts, build_decay_kernel(50, 50, 0.5))
    assert f[0, 0] == 1.0
    assert abs(f[4, 3] - EXP_MINUS_2_5) <= 1e-15


def test_field_is_linear_in_counts():
    rs = np.random.default_rng(0)
    k = build_decay_kernel(6, 5, 0.3)
    a = rs.integers(0, 5, (5, 6))
    b = rs.integers(0, 5, (5, 6))
    np.testing.assert_allclose(potential_field(a + b, k), potential_field(a, k) + potential_field(b, k),
                               rtol=0, atol=1e-12)


def test_sparse_and_dense_paths_agree():
    k = build_decay_kernel(20, 20, 0.4)
    counts = np.zeros(400)
    counts[[3, 77, 310]] = [2, 5, 1]
    sparse = potential_field(counts, k)
    dense = k.weights @ counts
    np.testing.assert_allclose(sparse, dense, rtol=0, atol=1e-12)


def test_dimension_mismatch_and_budget():
    k = build_decay_kernel(4, 3, 0.5)
    with pytest.raises(DimensionMismatch):
        potential_field(np.zeros((4, 3)), k)
    with pytest.raises(GridTooLarge):
        build_decay_kernel(100, 100, 0.5, max_entries=1_000_000)
    with pytest.raises(ValueError):
        build_decay_kernel(4, 3, 0.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 7), st.integers(1, 7), st.floats(0.05, 2.0), st.integers(0, 2**32 - 1))
def test_field_matches_brute_force(w, h, alpha, seed):
    counts = np.random.default_rng(seed).integers(0, 9, (h, w))
    got = potential_field(counts, build_decay_kernel(w, h, alpha))
    assert np.max(np.abs(got - brute_potential(counts, alpha))) <= 1e-10


def test_utility_combines_potentials():
    cfg = SimConfig(width=5, height=4, initial_divisions=20,
                    params_new=TypeParams(0.4, 0.3, 0.2, 1.0, 0.5, -1.0, 10))
    state = new_simulation(cfg)
    state.count_new[7] = 3  # hand-placed census
    kernels = build_kernel_set(cfg)
    total = (state.count_old + state.count_new).reshape(4, 5)
    new = state.count_new.reshape(4, 5)
    expect = (potential_field(total, kernels[(DivisionType.NEW, "mp")])
              + 0.5 * potential_field(new, kernels[(DivisionType.NEW, "ap")])
              - potential_field(total, kernels[(DivisionType.NEW, "cp")]))
    got = utility_field(state, DivisionType.NEW, kernels)
    assert got.dtype == DivisionType.NEW
    np.testing.assert_allclose(got.value, expect, rtol=0, atol=1e-12)
    pair = utility_pair(state.count_old, state.count_new, cfg, kernels)
    np.testing.assert_array_equal(pair[1], got.value.reshape(-1))


def test_utility_zero_when_betas_zero():
    cfg = SimConfig(width=4, height=4, initial_divisions=16,
                    params_old=TypeParams(beta_mp=0, beta_ap=0, beta_cp=0),
                    params_new=TypeParams(0.4, 0.4, 0.4, 0, 0, 0, 10))
    state = new_simulation(cfg)
    f = utility_field(state, DivisionType.OLD, build_kernel_set(cfg))
    assert not f.value.any()


def test_utility_kernel_grid_mismatch():
    cfg = SimConfig(width=4, height=4, initial_divisions=4)
    other = build_kernel_set(SimConfig(width=5, height=4, initial_divisions=4))
    with pytest.raises(DimensionMismatch):
        utility_field(new_simulation(cfg), DivisionType.OLD, other)


def test_softmax_values():
    p = relocation_probabilities([1.0, 0.0])
    assert abs(p[0] - SOFTMAX_1_0[0]) <= 1e-15 and abs(p[1] - SOFTMAX_1_0[1]) <= 1e-15
    np.testing.assert_array_equal(relocation_probabilities([2.0, 2.0, 2.0, 2.0]), [0.25] * 4)
    q = relocation_probabilities([1000.0, 0.0])
    assert np.all(np.isfinite(q)) and q[0] == 1.0 and q[1] < 1e-300


def test_softmax_errors():
    with pytest.raises(EmptyCandidateSet):
        relocation_probabilities([])
    with pytest.raises(ValueError):
        relocation_probabilities([0.0, math.nan])
