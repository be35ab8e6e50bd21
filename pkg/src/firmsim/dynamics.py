"""Growth, spin-off and relocation, composed into the step and run loop.

One step runs, in order:

1. every division grows by one size unit;
2. divisions past their maximum size split, in ascending id order;
3. both types' utility surfaces are computed once from the census;
4. every division (children included) draws stay / evaluate existing city /
   evaluate vacant cell and picks a destination against those frozen
   surfaces;
5. moves take effect and the step counter advances.

Decisions in phase 4 depend only on the frozen surfaces and on draws keyed by
division id, so applying each move as soon as it is decided gives the same
result as a synchronous update.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import rng
from ._backend import get_backend
from ._pykernels import _decide_existing, _decide_vacant
from ._tables import build_tables
from .config import CellId, DivisionType, SelectionMode, SimConfig
from .fields import UtilityField, build_kernel_set, utility_pair
from .metrics import cluster_k, cluster_l
from .state import Division, PopulationGrid, SimulationState, new_simulation


class RelocationDraw(enum.Enum):
    STAY = 0
    EVALUATE_EXISTING = 1
    EVALUATE_VACANT = 2


class NoCandidates(LookupError):
    """The candidate set for a relocation is empty."""


@dataclass(frozen=True)
class StepReport:
    step: int
    n_old: int
    n_new: int
    n_spinoffs_old: int  # children of Old parents (of either type)
    n_spinoffs_new: int  # children of New parents
    n_moves_existing: int
    n_moves_vacant: int
    n_stays: int
    n_no_candidates: int
    realized_growth_rate: float
    l_index: float | None = None

    @property
    def n_total(self) -> int:
        return self.n_old + self.n_new


@dataclass
class RunResult:
    reports: list[StepReport]
    final_state: SimulationState
    snapshots: list[tuple[int, PopulationGrid]] = field(default_factory=list)


def _kernels(state: SimulationState):
    kernels = getattr(state, "kernels", None)
    if kernels is None:
        kernels = build_kernel_set(state.cfg)
        state.kernels = kernels
    return kernels


def _uses_fields(cfg: SimConfig) -> bool:
    return any(
        b != 0
        for p in (cfg.params_old, cfg.params_new)
        for b in (p.beta_mp, p.beta_ap, p.beta_cp)
    )


def grow_divisions(state: SimulationState) -> None:
    state._size[: state.n] += 1


def _spinoffs(state: SimulationState, backend) -> tuple[int, int, int]:
    cfg = state.cfg
    n = state.n
    state.reserve(2 * n)
    key = rng.stream_key(cfg.seed, rng.SPINOFF, state.step)
    k, from_old, from_new = backend.spinoffs(
        state._dtype, state._size, state._cell, n,
        cfg.params_old.delta_max, cfg.params_new.delta_max, float(cfg.phi), key,
        state.count_old, state.count_new,
    )
    state.n = n + k
    return k, from_old, from_new


def process_spinoffs(state: SimulationState, backend=None) -> list[Division]:
    """Split divisions past their maximum size; returns the new children."""
    n0 = state.n
    _spinoffs(state, get_backend(backend))
    return [state.division(i) for i in range(n0, state.n)]


def classify_relocation(state: SimulationState, division: Division | int) -> RelocationDraw:
    i = division.id if isinstance(division, Division) else int(division)
    cfg = state.cfg
    u = rng.uniform(rng.stream_key(cfg.seed, rng.CLASSIFY, state.step), i)
    if u < cfg.lambda1:
        return RelocationDraw.STAY
    if u < cfg.lambda1 + cfg.lambda2:
        return RelocationDraw.EVALUATE_EXISTING
    return RelocationDraw.EVALUATE_VACANT


def select_destination(
    state: SimulationState,
    division: Division | int,
    draw: RelocationDraw,
    utility: UtilityField,
    mode: SelectionMode | str | None = None,
    u: float | None = None,
) -> CellId | None:
    """Destination for one division, or ``None`` to stay.

    ``u`` is the uniform pick draw used for tie-breaking / logit sampling;
    by default it is the division's draw from the run's stream, which is what
    :func:`step` would use.
    """
    if draw == RelocationDraw.STAY:
        raise ValueError("select_destination needs a relocation draw other than STAY")
    if isinstance(division, int):
        division = state.division(division)
    mode = SelectionMode(mode) if mode is not None else state.cfg.selection_mode
    if u is None:
        u = rng.uniform(rng.stream_key(state.cfg.seed, rng.PICK, state.step), division.id)
    k = int(utility.dtype)
    util = np.zeros((2, state.cfg.n_cells))
    util[k] = np.asarray(utility.value, dtype=np.float64).reshape(-1)
    tables = build_tables(state.count_total, util, mode)
    decide = _decide_existing if draw == RelocationDraw.EVALUATE_EXISTING else _decide_vacant
    dest = int(decide(tables, k, np.array([state.flat_index(division.cell)]), np.array([u]))[0])
    if dest == -2:
        raise NoCandidates(f"{draw.name}: no candidate cells for division {division.id}")
    return None if dest < 0 else state.cell_id(dest)


def utility_fields(state: SimulationState) -> np.ndarray:
    """Both types' flat utility surfaces, shape ``(2, cells)``."""
    if not _uses_fields(state.cfg):
        return np.zeros((2, state.cfg.n_cells))
    return utility_pair(state.count_old, state.count_new, state.cfg, _kernels(state))


def step(state: SimulationState, backend=None, track_l: bool = False) -> StepReport:
    cfg = state.cfg
    backend = get_backend(backend) if backend is None or isinstance(backend, str) else backend
    w_before = state.n

    grow_divisions(state)
    n_spawned, from_old, from_new = _spinoffs(state, backend)

    n = state.n
    if cfg.lambda1 >= 1.0:
        n_stay, n_ex, n_va, n_none = n, 0, 0, 0
    else:
        tables = build_tables(state.count_total, utility_fields(state), cfg.selection_mode)
        n_stay, n_ex, n_va, n_none = backend.relocate(
            state._dtype, state._cell, n,
            float(cfg.lambda1), float(cfg.lambda1 + cfg.lambda2),
            rng.stream_key(cfg.seed, rng.CLASSIFY, state.step),
            rng.stream_key(cfg.seed, rng.PICK, state.step),
            tables, state.count_old, state.count_new,
        )
    state.step += 1

    n_new = int(state.count_new.sum())
    l_index = None
    if track_l:
        l_index = cluster_l(cluster_k(state.census(), cfg.metric_distance), cfg.metric_distance)
    return StepReport(
        step=state.step,
        n_old=n - n_new,
        n_new=n_new,
        n_spinoffs_old=from_old,
        n_spinoffs_new=from_new,
        n_moves_existing=n_ex,
        n_moves_vacant=n_va,
        n_stays=n_stay,
        n_no_candidates=n_none,
        realized_growth_rate=(n - w_before) / w_before if w_before else math.nan,
        l_index=l_index,
    )


def run(
    cfg: SimConfig,
    snapshot_every: int | None = None,
    backend=None,
    track_l: bool = True,
    state: SimulationState | None = None,
    on_step: Callable[[SimulationState, StepReport], None] | None = None,
) -> RunResult:
    """Initialise (unless ``state`` is given) and advance ``cfg.steps`` steps.

    With ``snapshot_every=k`` the census is captured at step 0, every ``k``-th
    step and the final step.
    """
    backend = get_backend(backend) if backend is None or isinstance(backend, str) else backend
    if state is None:
        state = new_simulation(cfg)
    snapshots: list[tuple[int, PopulationGrid]] = []
    if snapshot_every:
        snapshots.append((state.step, state.census()))
    reports = []
    for _ in range(cfg.steps):
        report = step(state, backend, track_l=track_l)
        reports.append(report)
        if snapshot_every and (state.step % snapshot_every == 0 or len(reports) == cfg.steps):
            snapshots.append((state.step, state.census()))
        if on_step is not None:
            on_step(state, report)
    return RunResult(reports, state, snapshots)
