"""Command-line interface: run, serve, gen, verify, bench."""

from __future__ import annotations

import argparse
import os
import sys

from .config import ConfigError, PipelineConfig, default_config, load_config
from .pipeline import Pipeline, bench, run_session, verify_command_log
from .simbus import KIND_FORCE, KIND_FT, KIND_HALL, KIND_IMU, KIND_POSE, SCENARIOS, TraceError, dump_trace, gen_synthetic, load_trace
from .stream import StreamServer

CONFIG_ENV = "WRENCHLINK_CONFIG"

_TRACE_FLAGS = {
    KIND_FT: "ft_trace",
    KIND_IMU: "imu_trace",
    KIND_HALL: "hall_trace",
    KIND_FORCE: "force_trace",
    KIND_POSE: "pose_trace",
}


def _resolve_config(path: str | None) -> PipelineConfig:
    path = path or os.environ.get(CONFIG_ENV)
    return load_config(path) if path else default_config()


def _add_trace_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--ft-trace", help="FT wrench trace (CSV)")
    parser.add_argument("--imu-trace", help="IMU trace (JSON lines)")
    parser.add_argument("--hall-trace", help="Hall trace (JSON lines)")
    parser.add_argument("--force-trace", help="fingertip force trace (JSON lines)")
    parser.add_argument("--pose-trace", help="agent pose trace (JSON lines)")


def _trace_paths(args: argparse.Namespace) -> dict[str, str]:
    return {
        kind: getattr(args, attr)
        for kind, attr in _TRACE_FLAGS.items()
        if getattr(args, attr) is not None
    }


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args.config)
    if args.out_episode and not args.pose_trace:
        raise TraceError("--out-episode requires --pose-trace")
    pipeline, _ = run_session(
        cfg,
        _trace_paths(args),
        args.ticks,
        out_commands=args.out_commands,
        out_episode=args.out_episode,
    )
    print(f"ran {args.ticks} ticks", end="")
    if args.out_commands:
        print(f"; commands -> {args.out_commands}", end="")
    if args.out_episode:
        print(f"; episode -> {args.out_episode}", end="")
    print()
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args.config)
    host, _, port = args.listen.rpartition(":")
    host = host or "127.0.0.1"
    sources = {kind: load_trace(path, kind, cfg) for kind, path in _trace_paths(args).items()}
    pipeline = Pipeline(cfg, sources)
    server = StreamServer(pipeline, host, int(port), assets_dir=args.assets)
    bound = server.address
    # flush so supervising processes can read the bound port from a pipe
    print(f"serving on {bound[0]}:{bound[1]} (ctrl-c to stop)", flush=True)
    try:
        server.run(ticks=args.ticks, pace=not args.no_pace)
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return 0


def _cmd_gen(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args.config)
    sources = gen_synthetic(args.scenario, args.duration, args.seed, cfg)
    os.makedirs(args.out_dir, exist_ok=True)
    for kind, src in sources.items():
        ext = "csv" if kind == KIND_FT else "jsonl"
        path = os.path.join(args.out_dir, f"{args.scenario}_{kind}.{ext}")
        dump_trace(src, path)
        print(f"wrote {path} ({len(src)} samples)")
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    ok, message = verify_command_log(args.log)
    print(message)
    return 0 if ok else 1


def _cmd_bench(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args.config)
    stats = bench(cfg, duration_s=args.duration, scenario=args.scenario, seed=args.seed)
    print(
        f"{stats['ticks']} ticks of '{stats['scenario']}' in {stats['wall_s']:.3f} s wall "
        f"({stats['sim_s']:.1f} s simulated; "
        f"{'faster' if stats['faster_than_real_time'] else 'SLOWER'} than real time)"
    )
    print(f"{'stage':>8}  {'mean_ms':>9}  {'p50_ms':>9}  {'p99_ms':>9}  {'max_ms':>9}")
    for stage, row in stats["stages"].items():
        print(
            f"{stage:>8}  {row['mean_ms']:>9.4f}  {row['p50_ms']:>9.4f}  "
            f"{row['p99_ms']:>9.4f}  {row['max_ms']:>9.4f}"
        )
    budget_ms = 1000.0 / cfg.tick_rate_hz
    total = stats["stages"]["total"]
    within = total["mean_ms"] < budget_ms and total["p99_ms"] < budget_ms
    print(f"budget {budget_ms:.1f} ms/tick: {'within' if within else 'EXCEEDED'}")
    return 0 if within else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wrenchlink",
        description="Deterministic teleoperation feedback pipeline over simulated devices.",
    )
    parser.add_argument("--config", help=f"pipeline config file (or ${CONFIG_ENV})")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the pipeline over trace files")
    _add_trace_flags(p_run)
    p_run.add_argument("--ticks", type=int, required=True)
    p_run.add_argument("--out-commands", help="write the command log here")
    p_run.add_argument("--out-episode", help="write an episode file here (needs --pose-trace)")
    p_run.set_defaults(func=_cmd_run)

    p_serve = sub.add_parser("serve", help="run with a live telemetry/tuning endpoint")
    _add_trace_flags(p_serve)
    p_serve.add_argument("--listen", default="127.0.0.1:8765", help="host:port to bind")
    p_serve.add_argument("--ticks", type=int, default=None, help="stop after N ticks (default: endless)")
    p_serve.add_argument("--assets", help="static directory for the browser console")
    p_serve.add_argument("--no-pace", action="store_true", help="run as fast as possible")
    p_serve.set_defaults(func=_cmd_serve)

    p_gen = sub.add_parser("gen", help="generate synthetic traces")
    p_gen.add_argument("--scenario", required=True, choices=SCENARIOS)
    p_gen.add_argument("--duration", type=float, required=True, help="seconds")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out-dir", default=".")
    p_gen.set_defaults(func=_cmd_gen)

    p_verify = sub.add_parser("verify", help="re-run a command log's inputs and diff")
    p_verify.add_argument("log")
    p_verify.set_defaults(func=_cmd_verify)

    p_bench = sub.add_parser("bench", help="report per-stage timing percentiles")
    p_bench.add_argument("--duration", type=float, default=60.0)
    p_bench.add_argument("--scenario", default="swing", choices=SCENARIOS)
    p_bench.add_argument("--seed", type=int, default=1)
    p_bench.set_defaults(func=_cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, TraceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
