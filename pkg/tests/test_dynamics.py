import numpy as np
import pytest

from conftest import small_config
from firmsim import rng
from firmsim.config import CellId, DivisionType, InitSizePolicy, SelectionMode, SimConfig, TypeParams
from firmsim.dynamics import (
    NoCandidates, RelocationDraw, classify_relocation, grow_divisions, process_spinoffs,
    run, select_destination, step,
)
from firmsim.fields import UtilityField
from firmsim.harness import preset
from firmsim.state import Division, SimulationState, new_simulation


def _state(divs, w=5, h=4, **kw):
    cfg = SimConfig(width=w, height=h, initial_divisions=1, **kw)
    return SimulationState.from_divisions(
        cfg, [Division(i, t, s, CellId(*c)) for i, (t, s, c) in enumerate(divs)])


def test_growth_adds_one():
    state = new_simulation(SimConfig(seed=2))
    before = state.size.copy()
    grow_divisions(state)
    np.testing.assert_array_equal(state.size, before + 1)


def test_spinoff_thresholds_and_child_placement():
    O, N = DivisionType.OLD, DivisionType.NEW
    state = _state([(O, 51, (1, 1)), (O, 50, (2, 0)), (N, 11, (4, 3)), (N, 10, (0, 0))], phi=0.0)
    children = process_spinoffs(state)
    assert [(c.id, c.dtype, c.size, c.cell) for c in children] == [
        (4, O, 0, CellId(1, 1)), (5, N, 0, CellId(4, 3))]
    assert state.size[:4].tolist() == [0, 50, 0, 10]
    assert state.census().total() == 6
    np.testing.assert_array_equal(state.count_old + state.count_new,
                                  state.census().count_total.reshape(-1))


def test_type_switch_at_phi_one():
    state = _state([(DivisionType.OLD, 50, (0, 0))], phi=1.0)
    (child,) = process_spinoffs(state)
    assert child.dtype == DivisionType.NEW
    assert state.size[0] == 0


def test_type_switch_never_at_phi_zero():
    state = _state([(DivisionType.OLD, 50, (0, 0))] * 50, phi=0.0)
    assert process_spinoffs(state) == []


def test_type_switch_frequency():
    n = 20_000
    state = _state([(DivisionType.OLD, 50, (0, 0))] * n, w=1, h=1, phi=0.1)
    children = process_spinoffs(state)
    # binomial sd is 42
    assert abs(len(children) - 2000) < 200
    assert all(c.dtype == DivisionType.NEW for c in children)


def test_classification_frequencies():
    cfg = SimConfig(lambda1=0.9, lambda2=0.09, lambda3=0.01)
    state = SimulationState.from_divisions(cfg, [])
    draws = [classify_relocation(state, i) for i in range(50_000)]
    frac = {d: draws.count(d) / len(draws) for d in RelocationDraw}
    assert abs(frac[RelocationDraw.STAY] - 0.9) < 0.01
    assert abs(frac[RelocationDraw.EVALUATE_EXISTING] - 0.09) < 0.005
    assert abs(frac[RelocationDraw.EVALUATE_VACANT] - 0.01) < 0.002


def _field(values, dtype=DivisionType.OLD):
    return UtilityField(np.asarray(values, dtype=float), dtype)


def test_argmax_moves_only_on_strict_improvement():
    O = DivisionType.OLD
    state = _state([(O, 0, (0, 0)), (O, 0, (1, 0)), (O, 0, (2, 0))], w=3, h=1,
                   selection_mode=SelectionMode.ARGMAX_IMPROVE)
    u = _field([[1.0, 3.0, 2.0]])
    assert select_destination(state, 0, RelocationDraw.EVALUATE_EXISTING, u) == CellId(1, 0)
    assert select_destination(state, 1, RelocationDraw.EVALUATE_EXISTING, u) is None
    tie = _field([[3.0, 3.0, 2.0]])
    assert select_destination(state, 1, RelocationDraw.EVALUATE_EXISTING, tie) is None


def test_argmax_tie_break_is_uniform_over_ties():
    O = DivisionType.OLD
    state = _state([(O, 0, (0, 0))], w=4, h=1, selection_mode=SelectionMode.ARGMAX_IMPROVE)
    u = _field([[0.0, 5.0, 1.0, 5.0]])
    picks = [select_destination(state, 0, RelocationDraw.EVALUATE_VACANT, u, u=v)
             for v in (0.1, 0.4, 0.6, 0.99)]
    assert picks == [CellId(1, 0), CellId(1, 0), CellId(3, 0), CellId(3, 0)]


def test_logit_existing_excludes_own_cell():
    O = DivisionType.OLD
    state = _state([(O, 0, (0, 0)), (O, 0, (1, 0)), (O, 0, (2, 0))], w=4, h=1,
                   selection_mode=SelectionMode.LOGIT_SAMPLE)
    u = _field([[0.0, np.log(3.0), 5.0, 9.0]])  # cell 3 vacant, must never be chosen
    grid = np.linspace(0, 1, 4000, endpoint=False) + 1 / 8000
    picks = [select_destination(state, 2, RelocationDraw.EVALUATE_EXISTING, u, u=v) for v in grid]
    assert CellId(2, 0) not in picks and CellId(3, 0) not in picks
    assert abs(picks.count(CellId(1, 0)) / len(picks) - 0.75) < 1e-3


def test_logit_vacant_uniform_when_utilities_equal():
    O = DivisionType.OLD
    state = _state([(O, 0, (0, 0))], w=5, h=1, selection_mode=SelectionMode.LOGIT_SAMPLE)
    u = _field([[0.0] * 5])
    grid = np.linspace(0, 1, 400, endpoint=False) + 1 / 800
    picks = [select_destination(state, 0, RelocationDraw.EVALUATE_VACANT, u, u=v) for v in grid]
    assert {c.x: picks.count(c) for c in set(picks)} == {1: 100, 2: 100, 3: 100, 4: 100}


def test_no_candidates():
    O = DivisionType.OLD
    state = _state([(O, 0, (0, 0)), (O, 0, (0, 0))], w=2, h=1)
    with pytest.raises(NoCandidates):
        select_destination(state, 0, RelocationDraw.EVALUATE_EXISTING, _field([[0.0, 0.0]]))
    full = _state([(O, 0, (0, 0)), (O, 0, (1, 0))], w=2, h=1)
    with pytest.raises(NoCandidates):
        select_destination(full, 0, RelocationDraw.EVALUATE_VACANT, _field([[0.0, 0.0]]))
    with pytest.raises(ValueError):
        select_destination(full, 0, RelocationDraw.STAY, _field([[0.0, 0.0]]))


def test_no_candidates_counted_not_fatal():
    cfg = SimConfig(width=2, height=1, initial_divisions=2, lambda1=0.0, lambda2=0.0, lambda3=1.0,
                    init_size_policy=InitSizePolicy.ZERO)
    report = step(new_simulation(cfg))
    assert report.n_no_candidates == 2 and report.n_moves_vacant == 0


@pytest.mark.parametrize("mode", list(SelectionMode))
def test_step_conserves_and_keeps_census_consistent(mode):
    state = new_simulation(small_config(selection_mode=mode, lambda1=0.5, lambda2=0.3, lambda3=0.2))
    for _ in range(15):
        n0 = state.n
        r = step(state)
        assert r.n_total == n0 + r.n_spinoffs_old + r.n_spinoffs_new == state.n
        assert r.n_stays + r.n_moves_existing + r.n_moves_vacant + r.n_no_candidates == state.n
        incremental = (state.count_old.copy(), state.count_new.copy())
        state.rebuild_census()
        np.testing.assert_array_equal(incremental[0], state.count_old)
        np.testing.assert_array_equal(incremental[1], state.count_new)
    assert state.step == 15


def test_all_stay_when_lambda1_is_one():
    state = new_simulation(small_config(lambda1=1.0, lambda2=0.0, lambda3=0.0))
    cells = state.cell.copy()
    r = step(state)
    assert r.n_moves_existing == r.n_moves_vacant == 0
    np.testing.assert_array_equal(state.cell[: cells.size], cells)


def test_run_is_deterministic_and_seed_sensitive():
    a = run(small_config(seed=5), track_l=True)
    b = run(small_config(seed=5), track_l=True)
    c = run(small_config(seed=6), track_l=True)
    assert a.final_state.digest() == b.final_state.digest() != c.final_state.digest()
    assert a.reports == b.reports
    assert all(r.l_index is not None for r in a.reports)


def test_snapshot_schedule():
    res = run(small_config(steps=10), snapshot_every=4, track_l=False)
    assert [s for s, _ in res.snapshots] == [0, 4, 8, 10]
    assert res.snapshots[-1][1] == res.final_state.census()


def test_split_run_equals_full_run():
    cfg = small_config(steps=12)
    full = run(cfg, track_l=False).final_state
    half = run(cfg.replace(steps=6), track_l=False).final_state
    rest = run(cfg.replace(steps=6), track_l=False, state=half).final_state
    assert rest.step == full.step == 12
    for name in ("dtype", "size", "cell", "count_old", "count_new"):
        np.testing.assert_array_equal(getattr(rest, name), getattr(full, name))


def test_new_type_emerges_under_default_phi():
    res = run(SimConfig(steps=60, init_size_policy=InitSizePolicy.UNIFORM_RANDOM), track_l=False)
    assert res.reports[-1].n_new > 0


def test_early_spinoff_rate_near_fifty():
    # Sizes start uniform on 0..49 and a split needs size 51, so step 1 has
    # none and each later step catches the 1/50 of divisions that started at
    # the matching size: 2500 / 50 = 50 in steps 1-2 together.
    null = preset(1).config
    totals = []
    for seed in range(100):
        state = new_simulation(null.replace(seed=seed, phi=0.0))
        first = step(state).n_spinoffs_old
        assert first == 0
        totals.append(first + step(state).n_spinoffs_old)
    assert abs(np.mean(totals) - 50) < 3
