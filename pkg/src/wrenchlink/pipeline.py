"""Fixed-rate pipeline orchestrator, episode recording, replay verification.

Every tick executes the same stage order on the simulated clock: sample the
(held) device inputs, filter the wrench, encode servo targets, fuse finger
angles, calibrate the pinch, map haptics, then emit. Outputs are a pure
function of (config, traces, injections), so replays are byte-identical;
stage compute times are measured for telemetry but never written into
command logs or episode files.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass
from typing import Callable

from .config import ConfigError, PipelineConfig, apply_patch, config_sha256, dumps_config, loads_config
from .fusion import FingerFusion
from .haptics import map_haptics
from .model import (
    FingerAngles,
    FingertipForces,
    HallSample,
    ImuFrame,
    SimClock,
    Wrench,
)
from .simbus import (
    EPISODE_HEADER,
    KIND_FORCE,
    KIND_FT,
    KIND_HALL,
    KIND_IMU,
    KIND_POSE,
    CommandLog,
    TraceError,
    TraceSource,
    dumps_command_log,
    load_trace,
    read_command_log,
)
from .wrench_map import WrenchFilter, encode_wrench

STAGES = ("sample", "filter", "encode", "fusion", "haptic", "emit")


@dataclass(frozen=True)
class TickReport:
    """Everything one tick produced, plus per-stage compute time."""

    tick: int
    t_us: int
    wrench: Wrench
    servo: ServoCommand
    fingers: FingerAngles
    haptic: HapticCommand
    stage_us: dict[str, float]


@dataclass(frozen=True)
class EpisodeRecord:
    """One demonstration timestep: 6D wrench + 12D pose observation, 12D action."""

    t: int
    obs_wrench: tuple[float, ...]
    obs_pose: tuple[float, ...]
    action: tuple[float, ...]

    def __post_init__(self) -> None:
        for name, n in (("obs_wrench", 6), ("obs_pose", 12), ("action", 12)):
            values = tuple(float(v) for v in getattr(self, name))
            if len(values) != n:
                raise ValueError(f"EpisodeRecord.{name} must have length {n}, got {len(values)}")
            object.__setattr__(self, name, values)


class Pipeline:
    """Single-owner tick loop state over trace-driven virtual devices.

    Config patches and signal injections are applied between ticks only,
    keeping each tick a pure function of (state, config, samples).
    """

    def __init__(
        self,
        cfg: PipelineConfig,
        sources: dict[str, TraceSource] | None = None,
        pose_source: TraceSource | None = None,
    ) -> None:
        cfg.validate()
        self.cfg = cfg
        self.sources = dict(sources or {})
        if pose_source is None:
            pose_source = self.sources.get(KIND_POSE)
        elif pose_source.kind != KIND_POSE:
            raise TraceError(f"pose source must have kind {KIND_POSE!r}, got {pose_source.kind!r}")
        self.pose_source = pose_source
        self.clock = SimClock.for_rate(cfg.tick_rate_hz)
        self.tick_index = 0
        self.filter = WrenchFilter(cfg)
        self.fusion = FingerFusion(cfg)
        self.log = CommandLog()
        self.episode: list[EpisodeRecord] = []
        self.record_episode = pose_source is not None
        self._injected_wrench: dict[str, float] | None = None
        self._injected_hall: float | None = None

    # -- tick-boundary controls -------------------------------------------

    def patch_config(self, fields: dict) -> PipelineConfig:
        """Apply a validated config patch; rejects atomically on any error."""
        self.cfg = apply_patch(self.cfg, fields)
        return self.cfg

    def inject_wrench(self, components: dict[str, float] | None) -> None:
        """Override the FT source with fixed components until cleared (None)."""
        if components is None:
            self._injected_wrench = None
            return
        allowed = {"fx", "fy", "fz", "tx", "ty", "tz"}
        bad = set(components) - allowed
        if bad:
            raise ValueError(f"unknown wrench components: {sorted(bad)}")
        values = {k: float(v) for k, v in components.items()}
        for k, v in values.items():
            if not math.isfinite(v):
                raise ValueError(f"wrench component {k} must be finite")
        self._injected_wrench = values

    def inject_hall(self, h: float | None) -> None:
        """Override the Hall source with a fixed reading until cleared (None)."""
        if h is None:
            self._injected_hall = None
            return
        h = float(h)
        if not 0 <= h <= self.cfg.hall_adc_max:
            raise ValueError(f"hall value must be in [0, {self.cfg.hall_adc_max}], got {h}")
        self._injected_hall = h

    # -- sampling with zero-order hold and neutral fallbacks ---------------

    def _sample_wrench(self, t_us: int) -> Wrench:
        if self._injected_wrench is not None:
            return Wrench(t_us, **{k: self._injected_wrench.get(k, 0.0) for k in ("fx", "fy", "fz", "tx", "ty", "tz")})
        src = self.sources.get(KIND_FT)
        held = src.sample_at(t_us) if src else None
        if held is None:
            return Wrench.zero(t_us)
        return Wrench(t_us, *held.components())

    def _sample_imu(self, t_us: int) -> ImuFrame:
        src = self.sources.get(KIND_IMU)
        held = src.sample_at(t_us) if src else None
        if held is None:
            return ImuFrame.at_rest(t_us)
        return ImuFrame(t_us, held.sensors)

    def _sample_hall(self, t_us: int) -> HallSample:
        if self._injected_hall is not None:
            return HallSample(t_us, self._injected_hall)
        src = self.sources.get(KIND_HALL)
        held = src.sample_at(t_us) if src else None
        if held is None:
            return HallSample(t_us, 0.0)
        return HallSample(t_us, held.h)

    def _sample_forces(self, t_us: int) -> FingertipForces:
        src = self.sources.get(KIND_FORCE)
        held = src.sample_at(t_us) if src else None
        if held is None:
            return FingertipForces.zero(t_us)
        return FingertipForces(t_us, held.force)

    def _sample_pose(self, t_us: int) -> tuple[float, ...]:
        held = self.pose_source.sample_at(t_us) if self.pose_source else None
        return held.pose if held is not None else (0.0,) * 12

    # -- the loop body ------------------------------------------------------

    def tick(self) -> TickReport:
        cfg = self.cfg
        t_us = self.clock.t_us
        dt = self.clock.tick_us / 1e6
        stage_us: dict[str, float] = {}
        t_start = time.perf_counter_ns()

        wrench_raw = self._sample_wrench(t_us)
        frame = self._sample_imu(t_us)
        hall = self._sample_hall(t_us)
        forces = self._sample_forces(t_us)
        t_sampled = time.perf_counter_ns()
        stage_us["sample"] = (t_sampled - t_start) / 1e3

        filtered = self.filter.update(wrench_raw, cfg)
        t_filtered = time.perf_counter_ns()
        stage_us["filter"] = (t_filtered - t_sampled) / 1e3

        servo = encode_wrench(filtered, cfg)
        t_encoded = time.perf_counter_ns()
        stage_us["encode"] = (t_encoded - t_filtered) / 1e3

        raw_thumb = self.fusion.fuse_thumb(frame, dt, cfg)
        raw_index = self.fusion.fuse_finger(frame, "index", dt, cfg)
        middle = self.fusion.fuse_finger(frame, "middle", dt, cfg)
        ring = self.fusion.fuse_finger(frame, "ring", dt, cfg)
        little = self.fusion.fuse_finger(frame, "little", dt, cfg)
        thumb, index, pinch_state, blend = self.fusion.calibrate_pinch(hall, raw_thumb, raw_index, cfg)
        fingers = FingerAngles(t_us, (thumb, index, middle, ring, little), pinch_state, blend)
        t_fused = time.perf_counter_ns()
        stage_us["fusion"] = (t_fused - t_encoded) / 1e3

        haptic = map_haptics(forces, cfg)
        t_haptic = time.perf_counter_ns()
        stage_us["haptic"] = (t_haptic - t_fused) / 1e3

        self.log.append(self.tick_index, servo, haptic)
        if self.record_episode:
            self.episode.append(
                EpisodeRecord(
                    t=self.tick_index,
                    obs_wrench=filtered.components(),
                    obs_pose=self._sample_pose(t_us),
                    # action is the pose commanded for the next tick (hold at end)
                    action=self._sample_pose(t_us + self.clock.tick_us),
                )
            )
        t_end = time.perf_counter_ns()
        stage_us["emit"] = (t_end - t_haptic) / 1e3
        stage_us["total"] = (t_end - t_start) / 1e3

        report = TickReport(self.tick_index, t_us, filtered, servo, fingers, haptic, stage_us)
        self.tick_index += 1
        self.clock = self.clock.advance(1)
        return report

    def run(self, ticks: int, on_report: Callable[[TickReport], None] | None = None) -> list[TickReport]:
        if ticks < 0:
            raise ValueError(f"ticks must be non-negative, got {ticks}")
        reports = []
        for _ in range(ticks):
            report = self.tick()
            reports.append(report)
            if on_report is not None:
                on_report(report)
        return reports


# ---------------------------------------------------------------------------
# File emission and replay verification

def _sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def trace_refs(trace_paths: dict[str, str]) -> dict[str, dict[str, str]]:
    """Identify input trace files by path and content hash."""
    return {kind: {"path": path, "sha256": _sha256_file(path)} for kind, path in sorted(trace_paths.items())}


def command_log_header(cfg: PipelineConfig, refs: dict, ticks: int) -> dict:
    return {
        "version": 1,
        "ticks": ticks,
        "config_sha256": config_sha256(cfg),
        "config_ini": dumps_config(cfg),
        "traces": refs,
    }


def write_command_log(log: CommandLog, path: str, header: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_command_log(log, header))


def episode_header(cfg: PipelineConfig, refs: dict, ticks: int) -> dict:
    return {
        "version": 1,
        "ticks": ticks,
        "config_sha256": config_sha256(cfg),
        "traces": refs,
    }


def dumps_episode(records: list[EpisodeRecord], header: dict) -> str:
    lines = [EPISODE_HEADER, json.dumps({"type": "header", **header}, separators=(", ", ": "))]
    for r in records:
        lines.append(
            json.dumps(
                {
                    "t": r.t,
                    "obs_wrench": list(r.obs_wrench),
                    "obs_pose": list(r.obs_pose),
                    "action": list(r.action),
                },
                separators=(", ", ": "),
            )
        )
    return "\n".join(lines) + "\n"


def write_episode(records: list[EpisodeRecord], path: str, header: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_episode(records, header))


def read_episode(path: str) -> tuple[dict, list[EpisodeRecord]]:
    """Parse and schema-check an episode file."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != EPISODE_HEADER:
        raise TraceError(f"{path}:1: missing episode header {EPISODE_HEADER!r}")
    if len(lines) < 2:
        raise TraceError(f"{path}: missing header record")
    header = json.loads(lines[1])
    if header.get("type") != "header":
        raise TraceError(f"{path}:2: first record must be the header")
    records = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            record = EpisodeRecord(
                t=int(obj["t"]),
                obs_wrench=tuple(obj["obs_wrench"]),
                obs_pose=tuple(obj["obs_pose"]),
                action=tuple(obj["action"]),
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise TraceError(f"{path}:{lineno}: {exc}") from exc
        if record.t != len(records):
            raise TraceError(f"{path}:{lineno}: timestep {record.t} not contiguous")
        records.append(record)
    return header, records


def run_session(
    cfg: PipelineConfig,
    trace_paths: dict[str, str],
    ticks: int,
    out_commands: str | None = None,
    out_episode: str | None = None,
) -> tuple[Pipeline, list[TickReport]]:
    """Load traces, run the loop, and write command log / episode files."""
    sources = {kind: load_trace(path, kind, cfg) for kind, path in trace_paths.items()}
    pipeline = Pipeline(cfg, sources)
    if out_episode is not None and pipeline.pose_source is None:
        raise TraceError("recording an episode requires a pose trace")
    reports = pipeline.run(ticks)
    refs = trace_refs(trace_paths)
    if out_commands is not None:
        write_command_log(pipeline.log, out_commands, command_log_header(cfg, refs, ticks))
    if out_episode is not None:
        write_episode(pipeline.episode, out_episode, episode_header(cfg, refs, ticks))
    return pipeline, reports


def verify_command_log(path: str) -> tuple[bool, str]:
    """Re-run a command log's recorded inputs and diff the outputs.

    Returns (True, "identical") or (False, reason naming the first difference).
    """
    header, lines = read_command_log(path)
    try:
        cfg = loads_config(header["config_ini"], source=f"{path}#config")
    except (KeyError, ConfigError) as exc:
        return False, f"cannot reconstruct config: {exc}"
    if config_sha256(cfg) != header.get("config_sha256"):
        return False, "embedded config does not match its recorded hash"

    trace_paths: dict[str, str] = {}
    for kind, ref in header.get("traces", {}).items():
        tpath = ref["path"]
        try:
            actual = _sha256_file(tpath)
        except OSError as exc:
            return False, f"trace {tpath} unreadable: {exc}"
        if actual != ref.get("sha256"):
            return False, f"trace {tpath} changed since the log was written"
        trace_paths[kind] = tpath

    sources = {kind: load_trace(tpath, kind, cfg) for kind, tpath in trace_paths.items()}
    pipeline = Pipeline(cfg, sources)
    pipeline.run(int(header["ticks"]))
    fresh = pipeline.log.lines()
    if len(fresh) != len(lines):
        return False, f"record count differs: log has {len(lines)}, replay produced {len(fresh)}"
    for got, want in zip(fresh, lines):
        if got != want:
            tick = json.loads(want).get("tick", "?")
            return False, f"first difference at tick {tick}"
    return True, "identical"


# ---------------------------------------------------------------------------
# Benchmarking

def _percentile(values: list[float], q: float) -> float:
    ordered = sorted(values)
    if not ordered:
        return 0.0
    idx = min(len(ordered) - 1, max(0, round(q * (len(ordered) - 1))))
    return ordered[idx]


def bench(
    cfg: PipelineConfig, duration_s: float = 60.0, scenario: str = "swing", seed: int = 1
) -> dict:
    """Run a synthetic scenario and report per-stage timing statistics (ms)."""
    from .simbus import gen_synthetic

    sources = gen_synthetic(scenario, duration_s, seed, cfg)
    pipeline = Pipeline(cfg, sources)
    ticks = round(duration_s * cfg.tick_rate_hz)
    wall_start = time.perf_counter()
    reports = pipeline.run(ticks)
    wall_s = time.perf_counter() - wall_start

    stats: dict = {
        "scenario": scenario,
        "ticks": ticks,
        "wall_s": wall_s,
        "sim_s": ticks / cfg.tick_rate_hz,
        "faster_than_real_time": wall_s < ticks / cfg.tick_rate_hz,
        "stages": {},
    }
    for stage in STAGES + ("total",):
        series_ms = [r.stage_us[stage] / 1e3 for r in reports]
        stats["stages"][stage] = {
            "mean_ms": sum(series_ms) / len(series_ms),
            "p50_ms": _percentile(series_ms, 0.50),
            "p99_ms": _percentile(series_ms, 0.99),
            "max_ms": max(series_ms),
        }
    return stats
