"""Distance-decay kernels and the potential / utility surfaces built on them.

All three potentials share one form, ``F(i) = sum_j N_j * exp(-alpha * d_ij)``,
and differ only in which counts ``N`` feed them (all divisions for market
potential and congestion, same-type divisions for agglomeration) and in
their decay rate. A kernel is the dense ``(cells, cells)`` matrix of weights,
so a field is one matrix-vector product.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .config import DivisionType, SimConfig

DEFAULT_MAX_KERNEL_ENTRIES = 1 << 23  # 64 MiB of float64; admits 50x50 (6.25M)

KINDS = ("mp", "ap", "cp")


class GridTooLarge(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class EmptyCandidateSet(ValueError):
    pass


@dataclass(frozen=True)
class DecayKernel:
    width: int
    height: int
    alpha: float
    weights: np.ndarray  # (cells, cells), read-only

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    def weight(self, a, b) -> float:
        """Weight between two cells given as ``(x, y)`` pairs."""
        i = a[1] * self.width + a[0]
        j = b[1] * self.width + b[0]
        return float(self.weights[i, j])


@dataclass(frozen=True)
class UtilityField:
    value: np.ndarray  # (height, width)
    dtype: DivisionType


def cell_coordinates(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    flat = np.arange(width * height)
    return flat % width, flat // width


@functools.lru_cache(maxsize=6)
def _cached_weights(width: int, height: int, alpha: float) -> np.ndarray:
    x, y = cell_coordinates(width, height)
    dx = (x[:, None] - x[None, :]).astype(np.float64)
    dy = (y[:, None] - y[None, :]).astype(np.float64)
    dist = np.sqrt(dx * dx + dy * dy)
    del dx, dy
    w = np.exp(-alpha * dist, out=dist)
    w.flags.writeable = False
    return w


def build_decay_kernel(
    width: int,
    height: int,
    alpha: float,
    max_entries: int = DEFAULT_MAX_KERNEL_ENTRIES,
) -> DecayKernel:
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    entries = (width * height) ** 2
    if entries > max_entries:
        raise GridTooLarge(
            f"{width}x{height} grid needs {entries} kernel entries, budget is {max_entries}"
        )
    return DecayKernel(width, height, float(alpha), _cached_weights(width, height, float(alpha)))


KernelSet = Mapping[tuple[DivisionType, str], DecayKernel]


def build_kernel_set(cfg: SimConfig, max_entries: int = DEFAULT_MAX_KERNEL_ENTRIES) -> dict:
    """One kernel per (type, potential kind). Equal decay rates share storage."""
    kernels = {}
    for dtype in DivisionType:
        p = cfg.params(dtype)
        for kind, alpha in zip(KINDS, (p.alpha_mp, p.alpha_ap, p.alpha_cp)):
            kernels[(dtype, kind)] = build_decay_kernel(cfg.width, cfg.height, alpha, max_entries)
    return kernels


def potential_field(counts, kernel: DecayKernel) -> np.ndarray:
    """``field[i] = sum_j counts[j] * w_ij`` over every cell, self included.

    ``counts`` may be a ``(height, width)`` grid or a flat vector; the result
    has the same shape.
    """
    counts = np.asarray(counts)
    if counts.size != kernel.n_cells or (
        counts.ndim == 2 and counts.shape != (kernel.height, kernel.width)
    ):
        raise DimensionMismatch(
            f"counts shape {counts.shape} does not match {kernel.width}x{kernel.height} kernel"
        )
    flat = counts.reshape(-1).astype(np.float64)
    occupied = np.flatnonzero(flat)
    if occupied.size == 0:
        out = np.zeros(kernel.n_cells)
    elif occupied.size * 4 < kernel.n_cells:
        # the kernel is symmetric, so gathering rows of occupied sources is enough
        out = flat[occupied] @ kernel.weights[occupied]
    else:
        out = kernel.weights @ flat
    return out.reshape(counts.shape)


def _utility_flat(count_old, count_new, dtype: DivisionType, cfg: SimConfig, kernels, memo=None):
    p = cfg.params(dtype)
    total = count_old + count_new
    own = count_new if dtype == DivisionType.NEW else count_old
    memo = {} if memo is None else memo

    def field(kind, channel_name, counts):
        kernel = kernels[(dtype, kind)]
        key = (kernel.alpha, channel_name)
        if key not in memo:
            memo[key] = potential_field(counts, kernel)
        return memo[key]

    value = np.zeros(cfg.n_cells)
    if p.beta_mp != 0:
        value = value + p.beta_mp * field("mp", "total", total)
    if p.beta_ap != 0:
        value = value + p.beta_ap * field("ap", dtype.name, own)
    if p.beta_cp != 0:
        value = value + p.beta_cp * field("cp", "total", total)
    return value


def utility_field(state, dtype: DivisionType, kernels: KernelSet) -> UtilityField:
    """Weighted sum of market potential, same-type agglomeration potential and
    congestion at every cell, as seen by a division of ``dtype``."""
    cfg = state.cfg
    for kind in KINDS:
        k = kernels[(dtype, kind)]
        if (k.width, k.height) != (cfg.width, cfg.height):
            raise DimensionMismatch(f"{kind} kernel is {k.width}x{k.height}, grid is {cfg.width}x{cfg.height}")
    value = _utility_flat(state.count_old, state.count_new, dtype, cfg, kernels)
    return UtilityField(value.reshape(cfg.height, cfg.width), dtype)


def utility_pair(count_old, count_new, cfg: SimConfig, kernels: KernelSet) -> np.ndarray:
    """Flat utility surfaces for both types, shape ``(2, cells)``, sharing any
    potential the two types compute identically."""
    memo: dict = {}
    return np.stack([
        _utility_flat(count_old, count_new, DivisionType.OLD, cfg, kernels, memo),
        _utility_flat(count_old, count_new, DivisionType.NEW, cfg, kernels, memo),
    ])


def relocation_probabilities(utilities) -> np.ndarray:
    """Logit choice probabilities over a candidate set, max-shifted so large
    utilities cannot overflow."""
    u = np.asarray(utilities, dtype=np.float64)
    if u.size == 0:
        raise EmptyCandidateSet("no candidate cells")
    if not np.all(np.isfinite(u)):
        raise ValueError("utilities must be finite")
    w = np.exp(u - u.max())
    return w / w.sum()
