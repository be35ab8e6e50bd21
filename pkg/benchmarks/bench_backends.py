"""Compare the compiled and pure-Python kernels.

    python benchmarks/bench_backends.py [--divisions N] [--steps T]

Times the two per-division kernels on a synthetic population and a short
Model 4 run on each backend, and checks that both produce the same state.
"""
import argparse
import time

import numpy as np

from firmsim import rng
from firmsim._backend import available_backends, get_backend
from firmsim._tables import build_tables
from firmsim.config import SelectionMode
from firmsim.dynamics import run
from firmsim.harness import preset


def _population(n, cells, seed=0):
    rs = np.random.default_rng(seed)
    dtype = np.zeros(2 * n, np.uint8)
    size = np.zeros(2 * n, np.uint16)
    cell = np.zeros(2 * n, np.int32)
    dtype[:n] = rs.random(n) < 0.5
    size[:n] = rs.integers(0, 52, n)
    cell[:n] = rs.choice(cells, n, p=np.r_[0.5, 0.3, np.full(cells - 2, 0.2 / (cells - 2))])
    return dtype, size, cell


def _counts(dtype, cell, n, cells):
    old = np.bincount(cell[:n][dtype[:n] == 0], minlength=cells).astype(np.int64)
    new = np.bincount(cell[:n][dtype[:n] == 1], minlength=cells).astype(np.int64)
    return old, new


def bench_kernels(name, n, cells=2500, repeat=3):
    be = get_backend(name)
    util = np.random.default_rng(1).normal(0, 5, (2, cells))
    best = {"spinoffs": np.inf, "relocate": np.inf}
    for r in range(repeat):
        dtype, size, cell = _population(n, cells)
        co, cn = _counts(dtype, cell, n, cells)
        t = time.perf_counter()
        k = be.spinoffs(dtype, size, cell, n, 50, 10, 0.1, rng.stream_key(r, rng.SPINOFF, 0), co, cn)[0]
        best["spinoffs"] = min(best["spinoffs"], time.perf_counter() - t)
        tables = build_tables(co + cn, util, SelectionMode.LOGIT_SAMPLE)
        t = time.perf_counter()
        be.relocate(dtype, cell, n + k, 0.807, 0.997, rng.stream_key(r, rng.CLASSIFY, 0),
                    rng.stream_key(r, rng.PICK, 0), tables, co, cn)
        best["relocate"] = min(best["relocate"], time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--divisions", type=int, default=2_000_000)
    ap.add_argument("--steps", type=int, default=120)
    args = ap.parse_args()

    names = available_backends()
    print(f"backends: {', '.join(names)}")
    print(f"\nkernels, {args.divisions:,} divisions (best of 3)")
    print(f"{'backend':<8} {'spinoffs':>10} {'relocate':>10} {'ns/div':>8}")
    for name in names:
        t = bench_kernels(name, args.divisions)
        per = 1e9 * (t["spinoffs"] + t["relocate"]) / args.divisions
        print(f"{name:<8} {t['spinoffs']:>9.3f}s {t['relocate']:>9.3f}s {per:>8.1f}")

    cfg = preset(4).config.replace(seed=1, steps=args.steps)
    print(f"\nModel 4, {args.steps} steps")
    digests = {}
    for name in names:
        t = time.perf_counter()
        res = run(cfg, backend=name, track_l=True)
        dt = time.perf_counter() - t
        digests[name] = res.final_state.digest()
        print(f"{name:<8} {dt:>8.2f}s  final N {res.final_state.n:,}")
    print("states identical:", len(set(digests.values())) == 1)


if __name__ == "__main__":
    main()
