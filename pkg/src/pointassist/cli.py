"""Command-line entry points: trace replay, benchmarking, and the service."""

from __future__ import annotations

import argparse
import json
import sys

from .config import EngineConfig
from .kernels import backend_name
from .scene import SceneError, load_scene
from .simulation import MODES, Simulation
from .tracefile import TraceError, read_trace, summarize_events, write_events


def _load_config(path: str | None) -> EngineConfig:
    return EngineConfig.load(path) if path else EngineConfig()


def cmd_replay(args: argparse.Namespace) -> int:
    description = load_scene(args.scene)
    config = _load_config(args.config)
    if args.workers is not None:
        config = EngineConfig.from_dict({**config.to_dict(), "workers": args.workers})
    records = read_trace(args.trace)
    sim = Simulation(description, config, mode=args.mode)
    events = []
    for rec in records:
        events.extend(sim.step(rec.to_step_input()))
    if args.out:
        write_events(args.out, events)
    summary = summarize_events(events)
    summary["steps"] = len(records)
    summary["sim_seconds"] = round(sim.time, 6)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    from .bench import (bench_batch_overlaps, bench_full_step, format_table,
                        records_to_csv)

    description = load_scene(args.scene)
    candidates = [int(v) for v in args.candidates.split(",")]
    workers = [int(v) for v in args.workers.split(",")]
    backends = args.backends.split(",")
    records = bench_batch_overlaps(description, candidates, workers, backends,
                                   reps=args.reps, warmup=args.warmup)
    print(f"active kernel backend: {backend_name()}")
    print(format_table(records))
    if args.full_step:
        mean_ms, p95_ms = bench_full_step(description, _load_config(args.config),
                                          reps=args.reps, warmup=args.warmup)
        print(f"full assistance step: mean {mean_ms:.3f} ms, p95 {p95_ms:.3f} ms")
    if args.csv:
        with open(args.csv, "w") as f:
            f.write(records_to_csv(records))
        print(f"wrote {args.csv}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from .server import run_server

    description = load_scene(args.scene)
    run_server(description, _load_config(args.config), mode=args.mode,
               host=args.host, port=args.port, frontend_dir=args.frontend)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pointassist",
        description="Pointing-driven teleoperation assistance engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("replay", help="replay an input trace deterministically")
    p.add_argument("--scene", required=True, help="scene file or bundled name")
    p.add_argument("--trace", required=True, help="input trace file")
    p.add_argument("--mode", default="none", choices=MODES)
    p.add_argument("--config", default=None, help="engine config JSON")
    p.add_argument("--out", default=None, help="event log output path")
    p.add_argument("--workers", type=int, default=None,
                   help="override config worker count")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("bench", help="collision filter throughput benchmark")
    p.add_argument("--scene", required=True)
    p.add_argument("--candidates", default="1000,7125,20000,100000")
    p.add_argument("--workers", default="1,8")
    p.add_argument("--backends", default="native")
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--warmup", type=int, default=5)
    p.add_argument("--csv", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--full-step", action="store_true",
                   help="also time one full assistance step")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="run the live session service")
    p.add_argument("--scene", required=True)
    p.add_argument("--port", type=int, default=8750)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--config", default=None)
    p.add_argument("--mode", default="none", choices=MODES)
    p.add_argument("--frontend", default=None,
                   help="directory of built cockpit assets to serve at /")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SceneError, TraceError, ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
