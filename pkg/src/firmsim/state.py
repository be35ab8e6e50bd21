"""Population storage, initialisation and the per-cell census.

Divisions live in parallel arrays (type, size, cell) rather than as objects:
a single run reaches tens of millions of divisions. A division's id is its
index in those arrays. Divisions never die, so ids are dense, stable and
assigned in creation order.
"""
from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from . import rng
from .config import CellId, DivisionType, InitSizePolicy, SimConfig, validate_config

TYPE_DTYPE = np.uint8
SIZE_DTYPE = np.uint16
CELL_DTYPE = np.int32
COUNT_DTYPE = np.int64


@dataclass(frozen=True)
class Division:
    id: int
    dtype: DivisionType
    size: int
    cell: CellId


@dataclass
class PopulationGrid:
    """Division counts per cell, indexed ``[y, x]``."""

    count_old: np.ndarray
    count_new: np.ndarray

    @property
    def count_total(self) -> np.ndarray:
        return self.count_old + self.count_new

    @property
    def shape(self) -> tuple[int, int]:
        return self.count_old.shape

    @property
    def width(self) -> int:
        return self.count_old.shape[1]

    @property
    def height(self) -> int:
        return self.count_old.shape[0]

    def total(self) -> int:
        return int(self.count_old.sum() + self.count_new.sum())

    def channel(self, dtype: DivisionType | None) -> np.ndarray:
        if dtype is None:
            return self.count_total
        return self.count_new if dtype == DivisionType.NEW else self.count_old

    @classmethod
    def empty(cls, width: int, height: int) -> "PopulationGrid":
        z = np.zeros((height, width), dtype=COUNT_DTYPE)
        return cls(z, z.copy())

    @classmethod
    def from_flat(cls, count_old, count_new, width: int, height: int) -> "PopulationGrid":
        return cls(
            np.asarray(count_old, dtype=COUNT_DTYPE).reshape(height, width).copy(),
            np.asarray(count_new, dtype=COUNT_DTYPE).reshape(height, width).copy(),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PopulationGrid):
            return NotImplemented
        return np.array_equal(self.count_old, other.count_old) and np.array_equal(
            self.count_new, other.count_new
        )


class SimulationState:
    """Mutable run state: the population arrays, a cached census and the
    step counter. The random stream is stateless (see :mod:`firmsim.rng`), so
    the seed alone determines every draw."""

    def __init__(self, cfg: SimConfig, capacity: int = 0):
        self.cfg = cfg
        self.step = 0
        self.n = 0
        cap = max(int(capacity), 16)
        self._dtype = np.zeros(cap, dtype=TYPE_DTYPE)
        self._size = np.zeros(cap, dtype=SIZE_DTYPE)
        self._cell = np.zeros(cap, dtype=CELL_DTYPE)
        self.count_old = np.zeros(cfg.n_cells, dtype=COUNT_DTYPE)
        self.count_new = np.zeros(cfg.n_cells, dtype=COUNT_DTYPE)

    @property
    def seed(self) -> int:
        return self.cfg.seed

    @property
    def capacity(self) -> int:
        return self._dtype.shape[0]

    @property
    def dtype(self) -> np.ndarray:
        return self._dtype[: self.n]

    @property
    def size(self) -> np.ndarray:
        return self._size[: self.n]

    @property
    def cell(self) -> np.ndarray:
        return self._cell[: self.n]

    @property
    def count_total(self) -> np.ndarray:
        return self.count_old + self.count_new

    def reserve(self, needed: int) -> None:
        """Grow the backing arrays so at least ``needed`` divisions fit."""
        if needed <= self.capacity:
            return
        cap = max(needed, self.capacity + self.capacity // 2)
        for name in ("_dtype", "_size", "_cell"):
            old = getattr(self, name)
            new = np.zeros(cap, dtype=old.dtype)
            new[: self.n] = old[: self.n]
            setattr(self, name, new)

    def append(self, dtype, size, cell) -> None:
        dtype = np.asarray(dtype, dtype=TYPE_DTYPE)
        k = dtype.shape[0]
        self.reserve(self.n + k)
        sl = slice(self.n, self.n + k)
        self._dtype[sl] = dtype
        self._size[sl] = size
        self._cell[sl] = cell
        self.n += k

    def rebuild_census(self) -> None:
        cells = self.cfg.n_cells
        cell = self.cell
        total = np.bincount(cell, minlength=cells)
        new = np.bincount(cell[self.dtype == DivisionType.NEW], minlength=cells)
        self.count_new = new.astype(COUNT_DTYPE)
        self.count_old = (total - new).astype(COUNT_DTYPE)

    def census(self) -> PopulationGrid:
        return PopulationGrid.from_flat(
            self.count_old, self.count_new, self.cfg.width, self.cfg.height
        )

    def cell_id(self, flat: int) -> CellId:
        return CellId(int(flat) % self.cfg.width, int(flat) // self.cfg.width)

    def flat_index(self, cell: CellId) -> int:
        return cell.y * self.cfg.width + cell.x

    def division(self, i: int) -> Division:
        if not 0 <= i < self.n:
            raise IndexError(f"division id {i} out of range [0, {self.n})")
        return Division(
            i, DivisionType(int(self._dtype[i])), int(self._size[i]), self.cell_id(self._cell[i])
        )

    def divisions(self) -> Iterator[Division]:
        for i in range(self.n):
            yield self.division(i)

    def __len__(self) -> int:
        return self.n

    def serialize(self) -> bytes:
        """Canonical byte image of the state (config, step, population, census)."""
        buf = io.BytesIO()
        buf.write(self.cfg.to_json(indent=None).encode())
        buf.write(f"|{rng.RNG_VERSION}|{self.step}|{self.n}|".encode())
        for arr in (self.dtype, self.size, self.cell, self.count_old, self.count_new):
            buf.write(np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("<")).tobytes())
        return buf.getvalue()

    def digest(self) -> str:
        return hashlib.sha256(self.serialize()).hexdigest()

    @classmethod
    def from_divisions(cls, cfg: SimConfig, divisions: Iterable[Division], step: int = 0) -> "SimulationState":
        """State holding exactly ``divisions``; ids must be 0..n-1 in order."""
        divs = list(divisions)
        for k, d in enumerate(divs):
            if d.id != k:
                raise ValueError(f"division ids must be 0..n-1 in order, got {d.id} at {k}")
            if not (0 <= d.cell.x < cfg.width and 0 <= d.cell.y < cfg.height):
                raise ValueError(f"cell {d.cell} outside {cfg.width}x{cfg.height} grid")
        state = cls(cfg, capacity=len(divs))
        state.step = step
        state.append(
            [int(d.dtype) for d in divs],
            np.array([d.size for d in divs], dtype=SIZE_DTYPE),
            np.array([d.cell.y * cfg.width + d.cell.x for d in divs], dtype=CELL_DTYPE),
        )
        state.rebuild_census()
        return state


def new_simulation(cfg: SimConfig) -> SimulationState:
    """Place ``cfg.initial_divisions`` Old divisions one per cell, row-major from (0, 0)."""
    validate_config(cfg)
    n = cfg.initial_divisions
    state = SimulationState(cfg, capacity=2 * n)
    if cfg.init_size_policy == InitSizePolicy.ZERO:
        sizes = np.zeros(n, dtype=SIZE_DTYPE)
    else:
        key = rng.stream_key(cfg.seed, rng.INIT_SIZE, 0)
        u = rng.uniform_range(key, 0, n)
        sizes = np.floor(u * cfg.params_old.delta_max).astype(SIZE_DTYPE)
    state.append(np.zeros(n, dtype=TYPE_DTYPE), sizes, np.arange(n, dtype=CELL_DTYPE))
    state.rebuild_census()
    return state


def census(state: SimulationState) -> PopulationGrid:
    """Recount divisions per cell from the population arrays."""
    state.rebuild_census()
    return state.census()
