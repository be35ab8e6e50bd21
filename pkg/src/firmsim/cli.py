"""Command-line entry point: ``firmsim run | sweep | presets | render``.

Exit status is 0 on success, 1 on a usage error and 2 on a runtime failure.
"""
from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, SelectionMode, load_config, validate_config
from .harness import (
    IoFailure, SweepSpec, UnknownModelId, all_presets, preset, read_snapshot,
    render_raster, run_scenario, run_sweep,
)

SELECT = {"argmax": SelectionMode.ARGMAX_IMPROVE, "logit": SelectionMode.LOGIT_SAMPLE}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _csv_floats(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="firmsim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    r = sub.add_parser("run", help="run one scenario and write its output files")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="JSON scenario config")
    src.add_argument("--model", help="preset: 1-7 or text-lambda")
    r.add_argument("--seed", type=int)
    r.add_argument("--steps", type=int)
    r.add_argument("--out", default="firmsim-out")
    r.add_argument("--snapshot-every", type=int)
    r.add_argument("--select", choices=sorted(SELECT))
    r.add_argument("--lambda2", type=float, help="existing-city relocation probability, percent")
    r.add_argument("--lambda3", type=float, help="vacant-cell relocation probability, percent")
    r.add_argument("--phi", type=float)
    r.add_argument("--backend", choices=["cython", "python"])

    s = sub.add_parser("sweep", help="replicated lambda2 x lambda3 sweep")
    s.add_argument("--model", default="4")
    s.add_argument("--lambda2", type=_csv_floats, default=(7.0, 11.0, 15.0, 19.0), help="percent list")
    s.add_argument("--lambda3", type=_csv_floats, default=(0.2, 0.3, 0.4, 0.5), help="percent list")
    s.add_argument("--replicates", type=int, default=4)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--steps", type=int)
    s.add_argument("--out", default="firmsim-sweep")
    s.add_argument("--threads", type=int)
    s.add_argument("--backend", choices=["cython", "python"])

    sub.add_parser("presets", help="print the model presets as JSON")

    g = sub.add_parser("render", help="render a snapshot CSV as a PGM raster")
    g.add_argument("--snapshot", required=True)
    g.add_argument("--channel", choices=["old", "new", "total"], default="total")
    g.add_argument("--out", required=True)
    return p


def _run(args) -> int:
    cfg = load_config(args.config) if args.config else preset(args.model).config
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    if args.steps is not None:
        cfg = cfg.replace(steps=args.steps)
    if args.select:
        cfg = cfg.replace(selection_mode=SELECT[args.select])
    if args.phi is not None:
        cfg = cfg.replace(phi=args.phi)
    if args.lambda2 is not None or args.lambda3 is not None:
        l2 = args.lambda2 / 100.0 if args.lambda2 is not None else cfg.lambda2
        l3 = args.lambda3 / 100.0 if args.lambda3 is not None else cfg.lambda3
        cfg = cfg.with_lambdas(l2, l3)
    cfg = validate_config(cfg)
    out = run_scenario(cfg, args.out, snapshot_every=args.snapshot_every, backend=args.backend)
    print(json.dumps(out.summary, sort_keys=True))
    return 0


def _sweep(args) -> int:
    base = preset(args.model).config
    if args.steps is not None:
        base = base.replace(steps=args.steps)
    if args.replicates < 1:
        raise UsageError("--replicates must be positive")
    spec = SweepSpec(base, args.lambda2, args.lambda3, args.replicates, args.seed)
    result = run_sweep(spec, args.out, threads=args.threads, backend=args.backend)
    for m in result.means:
        print(f"lambda2={m['lambda2_pct']}% lambda3={m['lambda3_pct']}% mean_L={m['mean_l']:.2f}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            return _run(args)
        if args.command == "sweep":
            return _sweep(args)
        if args.command == "presets":
            print(json.dumps([p.to_dict() for p in all_presets()], indent=2))
            return 0
        if args.command == "render":
            render_raster(read_snapshot(args.snapshot), args.out, args.channel)
            return 0
    except (UsageError, UnknownModelId, ConfigError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (IoFailure, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 1


if __name__ == "__main__":
    sys.exit(main())
