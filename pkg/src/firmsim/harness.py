"""Model presets, scenario and sweep runners, and file exporters."""
from __future__ import annotations

import concurrent.futures
import csv
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from . import rng
from .config import DivisionType, SelectionMode, SimConfig, TypeParams, validate_config
from .dynamics import RunResult, run
from .metrics import DegenerateInput, cluster_k, cluster_l, growth_fit, rank_size
from .state import PopulationGrid

TIMESERIES_HEADER = [
    "step", "n_old", "n_new", "n_total", "l_index", "growth_rate",
    "moves_existing", "moves_vacant",
]
RANKSIZE_HEADER = ["rank", "x", "y", "count"]
SNAPSHOT_HEADER = ["x", "y", "count_old", "count_new"]
SWEEP_HEADER = ["lambda2_pct", "lambda3_pct", "replicate", "seed", "final_l", "final_n"]
SWEEP_MEANS_HEADER = ["lambda2_pct", "lambda3_pct", "replicates", "mean_l", "mean_n"]

MODEL_NAMES = {
    1: "No spatial preference",
    2: "Only MP",
    3: "MP+AP",
    4: "MP+AP+CP",
    5: "Larger MP",
    6: "Larger AP",
    7: "Larger MP+AP",
}
TEXT_LAMBDA = "text-lambda"


class UnknownModelId(ValueError):
    pass


class IoFailure(OSError):
    pass


@dataclass(frozen=True)
class ModelPreset:
    model_id: int | str
    name: str
    config: SimConfig

    def to_dict(self) -> dict:
        return {"model_id": self.model_id, "name": self.name, "config": self.config.to_dict()}


def _table1(model_id: int) -> SimConfig:
    alpha_new = {5: (0.2, 0.4, 0.4), 6: (0.4, 0.2, 0.4), 7: (0.2, 0.2, 0.4)}.get(
        model_id, (0.4, 0.4, 0.4)
    )
    beta = {1: (0.0, 0.0, 0.0), 2: (1.0, 0.0, 0.0), 3: (1.0, 0.5, 0.0)}.get(
        model_id, (1.0, 0.5, -1.0)
    )
    return SimConfig(
        width=50,
        height=50,
        params_old=TypeParams(0.5, 0.5, 0.5, *beta, delta_max=50),
        params_new=TypeParams(*alpha_new, *beta, delta_max=10),
        selection_mode=SelectionMode.LOGIT_SAMPLE,
        initial_divisions=2500,
        steps=210,
    ).with_lambdas(0.19, 0.003)


def preset(model_id: int | str) -> ModelPreset:
    """Parameter set for models 1-7, or ``"text-lambda"`` (Model 4 with
    stay / existing / vacant probabilities 0.9 / 0.09 / 0.01)."""
    if model_id == TEXT_LAMBDA:
        cfg = _table1(4).replace(lambda1=0.9, lambda2=0.09, lambda3=0.01)
        return ModelPreset(TEXT_LAMBDA, "MP+AP+CP, relocation 0.9/0.09/0.01", validate_config(cfg))
    try:
        mid = int(model_id)
    except (TypeError, ValueError):
        raise UnknownModelId(f"unknown model id {model_id!r}; expected 1-7 or {TEXT_LAMBDA!r}") from None
    if mid not in MODEL_NAMES or str(model_id).strip() != str(mid):
        raise UnknownModelId(f"unknown model id {model_id!r}; expected 1-7 or {TEXT_LAMBDA!r}")
    return ModelPreset(mid, MODEL_NAMES[mid], validate_config(_table1(mid)))


def all_presets() -> list[ModelPreset]:
    return [preset(k) for k in MODEL_NAMES]


# ----------------------------------------------------------------- writers

def _open_csv(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc


def _write_rows(path: Path, header: list[str], rows: Iterable) -> Path:
    path = Path(path)
    try:
        with _open_csv(path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except IoFailure:
        raise
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    return path


def _fmt(x: float | None) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


def write_timeseries(path, reports) -> Path:
    return _write_rows(path, TIMESERIES_HEADER, (
        [r.step, r.n_old, r.n_new, r.n_total, _fmt(r.l_index), _fmt(r.realized_growth_rate),
         r.n_moves_existing, r.n_moves_vacant]
        for r in reports
    ))


def write_ranksize(path, census: PopulationGrid) -> Path:
    return _write_rows(path, RANKSIZE_HEADER, (
        [rank, cell.x, cell.y, count]
        for rank, (cell, count) in enumerate(rank_size(census), start=1)
    ))


def write_snapshot(path, census: PopulationGrid) -> Path:
    h, w = census.shape
    return _write_rows(path, SNAPSHOT_HEADER, (
        [x, y, int(census.count_old[y, x]), int(census.count_new[y, x])]
        for y in range(h) for x in range(w)
    ))


def read_snapshot(path) -> PopulationGrid:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    if not rows or set(SNAPSHOT_HEADER) - set(rows[0]):
        raise ValueError(f"{path}: expected columns {SNAPSHOT_HEADER}")
    xs = np.array([int(r["x"]) for r in rows])
    ys = np.array([int(r["y"]) for r in rows])
    grid = PopulationGrid.empty(int(xs.max()) + 1, int(ys.max()) + 1)
    grid.count_old[ys, xs] = [int(r["count_old"]) for r in rows]
    grid.count_new[ys, xs] = [int(r["count_new"]) for r in rows]
    return grid


def _write_json(path: Path, obj) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    return path


def render_raster(snapshot: PopulationGrid, out_path, channel: str | DivisionType | None = "total") -> Path:
    """Write a plain-text (P2) PGM with log-scaled grey levels; row 0 is y = 0."""
    if isinstance(channel, str):
        key = channel.strip().lower()
        if key not in ("old", "new", "total"):
            raise ValueError(f"channel must be old, new or total, got {channel!r}")
        channel = None if key == "total" else DivisionType[key.upper()]
    counts = np.asarray(snapshot.channel(channel), dtype=np.int64)
    h, w = counts.shape
    top = int(counts.max()) if counts.size else 0
    if top == 0:
        pix = np.zeros_like(counts)
    else:
        pix = np.floor(255.0 * np.log1p(counts) / math.log1p(top) + 0.5).astype(np.int64)
    lines = ["P2", f"{w} {h}", "255"] + [" ".join(map(str, row)) for row in pix]
    out_path = Path(out_path)
    try:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text("\n".join(lines) + "\n", encoding="ascii")
    except OSError as exc:
        raise IoFailure(f"{out_path}: {exc}") from exc
    return out_path


# ---------------------------------------------------------------- scenarios

def growth_window(steps: int) -> tuple[int, int]:
    return (50 if steps >= 52 else 1), steps


def summarize(result: RunResult) -> dict:
    state = result.final_state
    cfg = state.cfg
    census = state.census()
    n = state.n
    final_l = cluster_l(cluster_k(census, cfg.metric_distance), cfg.metric_distance) if n else None
    start, stop = growth_window(len(result.reports))
    try:
        g = growth_fit(result.reports, start, stop)
        fit = {"slope": g.slope, "intercept": g.intercept,
               "r_squared": None if math.isnan(g.r_squared) else g.r_squared,
               "start": start, "stop": stop}
    except DegenerateInput:
        fit = None
    return {
        "steps": state.step,
        "seed": cfg.seed,
        "rng_version": rng.RNG_VERSION,
        "final_n_old": int(state.count_old.sum()),
        "final_n_new": int(state.count_new.sum()),
        "final_n_total": n,
        "metric_distance": cfg.metric_distance,
        "final_l": final_l,
        "n_cities": int(np.count_nonzero(state.count_total)),
        "growth_fit": fit,
    }


@dataclass
class ScenarioOutput:
    result: RunResult
    files: dict[str, Path] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


def run_scenario(cfg: SimConfig, out_dir, snapshot_every: int | None = None, backend=None) -> ScenarioOutput:
    """Run one configuration and write its output file set into ``out_dir``."""
    cfg = validate_config(cfg)
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"{out}: {exc}") from exc
    result = run(cfg, snapshot_every=snapshot_every, backend=backend, track_l=True)
    final = result.final_state.census()
    files = {
        "config": _write_json(out / "config.json", cfg.to_dict()),
        "timeseries": write_timeseries(out / "timeseries.csv", result.reports),
        "ranksize_final": write_ranksize(out / "ranksize_final.csv", final),
    }
    snaps = result.snapshots if snapshot_every else [(result.final_state.step, final)]
    for step_no, grid in snaps:
        files[f"snapshot_{step_no:04d}"] = write_snapshot(out / "snapshots" / f"snapshot_{step_no:04d}.csv", grid)
    files["snapshot_final"] = write_snapshot(out / "snapshot_final.csv", final)
    summary = summarize(result)
    files["summary"] = _write_json(out / "summary.json", summary)
    return ScenarioOutput(result, files, summary)


# -------------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class SweepSpec:
    base: SimConfig
    lambda2_values: tuple[float, ...]  # percent
    lambda3_values: tuple[float, ...]  # percent
    replicates: int = 4
    base_seed: int = 0

    def cell_config(self, i: int, j: int, r: int) -> SimConfig:
        cfg = self.base.with_lambdas(self.lambda2_values[i] / 100.0, self.lambda3_values[j] / 100.0)
        return validate_config(cfg.replace(seed=rng.derive_seed(self.base_seed, i, j, r)))


@dataclass(frozen=True)
class SweepRow:
    lambda2_pct: float
    lambda3_pct: float
    replicate: int
    seed: int
    final_l: float
    final_n: int


@dataclass
class SweepResult:
    rows: list[SweepRow]
    means: list[dict]

    def mean_l(self, lambda2_pct: float, lambda3_pct: float) -> float:
        for m in self.means:
            if m["lambda2_pct"] == lambda2_pct and m["lambda3_pct"] == lambda3_pct:
                return m["mean_l"]
        raise KeyError((lambda2_pct, lambda3_pct))


def run_sweep_cell(spec: SweepSpec, i: int, j: int, r: int, backend=None) -> SweepRow:
    """One (lambda2, lambda3, replicate) run; identical whether run alone or in a sweep."""
    cfg = spec.cell_config(i, j, r)
    state = run(cfg, backend=backend, track_l=False).final_state
    d = cfg.metric_distance
    return SweepRow(
        spec.lambda2_values[i], spec.lambda3_values[j], r, cfg.seed,
        cluster_l(cluster_k(state.census(), d), d), state.n,
    )


def sweep_threads() -> int:
    env = os.environ.get("FIRMSIM_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def run_sweep(spec: SweepSpec, out_dir=None, threads: int | None = None, backend=None) -> SweepResult:
    if spec.replicates < 1:
        raise ValueError("replicates must be positive")
    jobs = [
        (i, j, r)
        for i in range(len(spec.lambda2_values))
        for j in range(len(spec.lambda3_values))
        for r in range(spec.replicates)
    ]
    threads = threads or sweep_threads()
    if threads == 1:
        rows = [run_sweep_cell(spec, *job, backend=backend) for job in jobs]
    else:
        with concurrent.futures.ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(lambda job: run_sweep_cell(spec, *job, backend=backend), jobs))

    means = []
    for a in spec.lambda2_values:
        for b in spec.lambda3_values:
            sel = [row for row in rows if row.lambda2_pct == a and row.lambda3_pct == b]
            means.append({
                "lambda2_pct": a,
                "lambda3_pct": b,
                "replicates": len(sel),
                "mean_l": math.fsum(row.final_l for row in sel) / len(sel),
                "mean_n": math.fsum(row.final_n for row in sel) / len(sel),
            })
    result = SweepResult(rows, means)
    if out_dir is not None:
        out = Path(out_dir)
        _write_rows(out / "sweep.csv", SWEEP_HEADER, (
            [r.lambda2_pct, r.lambda3_pct, r.replicate, r.seed, repr(r.final_l), r.final_n] for r in rows
        ))
        _write_rows(out / "sweep_means.csv", SWEEP_MEANS_HEADER, (
            [m["lambda2_pct"], m["lambda3_pct"], m["replicates"], repr(m["mean_l"]), repr(m["mean_n"])]
            for m in means
        ))
    return result
