"""Virtual device bus: trace files, zero-order-hold sampling, synthetic scenarios.

Trace files are newline-delimited and versioned by a `#wrenchlink-trace v1`
first line. The dense FT stream is CSV with header `t_us,fx,fy,fz,tx,ty,tz`;
IMU, Hall, fingertip-force, and pose streams are JSON lines carrying a `kind`
discriminator. Timestamps must be strictly increasing within one source.

Synthetic scenarios are pure functions of (scenario, duration, seed, config).
Noise comes from SplitMix64, a documented 64-bit mixer, so generated traces
are reproducible bit-for-bit across implementations:

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)            # all arithmetic mod 2**64

Uniform doubles take the top 53 bits: (next_u64() >> 11) / 2**53.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable

from .config import PipelineConfig
from .model import (
    FingertipForces,
    HallSample,
    ImuFrame,
    ImuSensor,
    ServoCommand,
    HapticCommand,
    Wrench,
)

TRACE_HEADER = "#wrenchlink-trace v1"
COMMAND_LOG_HEADER = "#wrenchlink-commands v1"
EPISODE_HEADER = "#wrenchlink-episode v1"

KIND_FT = "ft"
KIND_IMU = "imu"
KIND_HALL = "hall"
KIND_FORCE = "force"
KIND_POSE = "pose"
TRACE_KINDS = (KIND_FT, KIND_IMU, KIND_HALL, KIND_FORCE, KIND_POSE)

SCENARIOS = ("step_press", "swing", "pinch")

FT_CSV_HEADER = "t_us,fx,fy,fz,tx,ty,tz"


class TraceError(ValueError):
    """Malformed trace file or violated trace invariant."""


@dataclass(frozen=True)
class PoseSample:
    """12D agent pose: 6 values for the arm, 6 for the hand."""

    t_us: int
    pose: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "t_us", int(self.t_us))
        pose = tuple(float(v) for v in self.pose)
        if len(pose) != 12:
            raise ValueError(f"PoseSample.pose must have length 12, got {len(pose)}")
        for v in pose:
            if not math.isfinite(v):
                raise ValueError("PoseSample.pose must be finite")
        object.__setattr__(self, "pose", pose)


_SAMPLE_TYPES = {
    KIND_FT: Wrench,
    KIND_IMU: ImuFrame,
    KIND_HALL: HallSample,
    KIND_FORCE: FingertipForces,
    KIND_POSE: PoseSample,
}


class TraceSource:
    """Read-only, time-ordered sample stream for one simulated device."""

    def __init__(self, kind: str, samples: Iterable, name: str = "<memory>") -> None:
        if kind not in TRACE_KINDS:
            raise TraceError(f"unknown trace kind {kind!r}")
        samples = tuple(samples)
        expected = _SAMPLE_TYPES[kind]
        last_t = None
        for row, s in enumerate(samples, start=1):
            if not isinstance(s, expected):
                raise TraceError(f"{name}: row {row}: expected {expected.__name__} payload")
            if last_t is not None and s.t_us <= last_t:
                raise TraceError(
                    f"{name}: row {row}: timestamp {s.t_us} not increasing (previous {last_t})"
                )
            last_t = s.t_us
        self.kind = kind
        self.name = name
        self.samples = samples
        self._times = [s.t_us for s in samples]

    def __len__(self) -> int:
        return len(self.samples)

    def sample_at(self, t_us: int):
        """Zero-order hold: latest sample at or before t_us, None before the first."""
        i = bisect_right(self._times, t_us) - 1
        return self.samples[i] if i >= 0 else None


def sample_at(src: TraceSource, t_us: int):
    return src.sample_at(t_us)


# ---------------------------------------------------------------------------
# Serialization

def _json_line(obj: dict) -> str:
    return json.dumps(obj, separators=(", ", ": "))


def _sample_to_line(kind: str, s) -> str:
    if kind == KIND_FT:
        return ",".join([str(s.t_us)] + [repr(v) for v in s.components()])
    if kind == KIND_IMU:
        return _json_line(
            {
                "kind": "imu",
                "t_us": s.t_us,
                "sensors": [{"gyro": list(e.gyro), "accel": list(e.accel)} for e in s.sensors],
            }
        )
    if kind == KIND_HALL:
        return _json_line({"kind": "hall", "t_us": s.t_us, "h": s.h})
    if kind == KIND_FORCE:
        return _json_line({"kind": "force", "t_us": s.t_us, "force": list(s.force)})
    if kind == KIND_POSE:
        return _json_line({"kind": "pose", "t_us": s.t_us, "pose": list(s.pose)})
    raise TraceError(f"unknown trace kind {kind!r}")  # pragma: no cover


def dumps_trace(src: TraceSource) -> str:
    lines = [TRACE_HEADER]
    if src.kind == KIND_FT:
        lines.append(FT_CSV_HEADER)
    lines.extend(_sample_to_line(src.kind, s) for s in src.samples)
    return "\n".join(lines) + "\n"


def dump_trace(src: TraceSource, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_trace(src))


def _parse_ft_row(parts: list[str]) -> Wrench:
    if len(parts) != 7:
        raise ValueError(f"expected 7 columns, got {len(parts)}")
    return Wrench(int(parts[0]), *(float(p) for p in parts[1:]))


def _parse_json_record(kind: str, obj: dict):
    tag = obj.get("kind")
    expected_tag = {KIND_IMU: "imu", KIND_HALL: "hall", KIND_FORCE: "force", KIND_POSE: "pose"}[kind]
    if tag != expected_tag:
        raise ValueError(f"record kind {tag!r} does not match trace kind {expected_tag!r}")
    t_us = obj["t_us"]
    if kind == KIND_IMU:
        sensors = tuple(ImuSensor(tuple(e["gyro"]), tuple(e["accel"])) for e in obj["sensors"])
        return ImuFrame(t_us, sensors)
    if kind == KIND_HALL:
        return HallSample(t_us, obj["h"])
    if kind == KIND_FORCE:
        return FingertipForces.from_raw(t_us, obj["force"])
    return PoseSample(t_us, tuple(obj["pose"]))


def loads_trace(
    text: str, kind: str, name: str = "<string>", cfg: PipelineConfig | None = None
) -> TraceSource:
    """Parse trace text; errors carry the 1-based line number."""
    if kind not in TRACE_KINDS:
        raise TraceError(f"unknown trace kind {kind!r}")
    lines = text.splitlines()
    if not lines or lines[0].strip() != TRACE_HEADER:
        raise TraceError(f"{name}:1: missing trace header {TRACE_HEADER!r}")

    samples = []
    start = 1
    if kind == KIND_FT:
        if len(lines) < 2 or lines[1].strip() != FT_CSV_HEADER:
            raise TraceError(f"{name}:2: FT trace requires CSV header {FT_CSV_HEADER!r}")
        start = 2
    for lineno, line in enumerate(lines[start:], start=start + 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            if kind == KIND_FT:
                sample = _parse_ft_row([p.strip() for p in line.split(",")])
            else:
                sample = _parse_json_record(kind, json.loads(line))
        except (ValueError, KeyError, TypeError, IndexError) as exc:
            raise TraceError(f"{name}:{lineno}: {exc}") from exc
        if cfg is not None and kind == KIND_HALL and sample.h > cfg.hall_adc_max:
            raise TraceError(f"{name}:{lineno}: hall value {sample.h} exceeds hall_adc_max")
        samples.append(sample)

    last_t = None
    for lineno_offset, s in enumerate(samples):
        if last_t is not None and s.t_us <= last_t:
            raise TraceError(
                f"{name}: sample {lineno_offset + 1}: timestamp {s.t_us} not increasing "
                f"(previous {last_t})"
            )
        last_t = s.t_us
    return TraceSource(kind, samples, name=name)


def load_trace(path: str, kind: str, cfg: PipelineConfig | None = None) -> TraceSource:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise TraceError(f"cannot read trace {path}: {exc}") from exc
    return loads_trace(text, kind, name=str(path), cfg=cfg)


# ---------------------------------------------------------------------------
# Command log

class CommandLog:
    """Per-tick servo and haptic commands as emitted by the loop."""

    def __init__(self) -> None:
        self.servo: list[tuple[int, ServoCommand]] = []
        self.haptic: list[tuple[int, HapticCommand]] = []

    def append(self, tick: int, servo: ServoCommand, haptic: HapticCommand) -> None:
        if self.servo and tick <= self.servo[-1][0]:
            raise ValueError(f"command tick {tick} not increasing")
        self.servo.append((tick, servo))
        self.haptic.append((tick, haptic))

    def lines(self) -> list[str]:
        out = []
        for (tick, s), (_, h) in zip(self.servo, self.haptic):
            out.append(
                _json_line(
                    {
                        "tick": tick,
                        "kind": "servo",
                        "t_us": s.t_us,
                        "angles": list(s.angles),
                        "clamped": list(s.clamped),
                    }
                )
            )
            out.append(
                _json_line({"tick": tick, "kind": "haptic", "t_us": h.t_us, "duty": list(h.duty)})
            )
        return out


def dumps_command_log(log: CommandLog, header: dict) -> str:
    lines = [COMMAND_LOG_HEADER, _json_line({"type": "header", **header})]
    lines.extend(log.lines())
    return "\n".join(lines) + "\n"


def read_command_log(path: str) -> tuple[dict, list[str]]:
    """Return (header dict, payload lines) of a command log file."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != COMMAND_LOG_HEADER:
        raise TraceError(f"{path}:1: missing command log header {COMMAND_LOG_HEADER!r}")
    if len(lines) < 2:
        raise TraceError(f"{path}: missing header record")
    try:
        header = json.loads(lines[1])
    except ValueError as exc:
        raise TraceError(f"{path}:2: {exc}") from exc
    return header, lines[2:]


# ---------------------------------------------------------------------------
# Synthetic scenarios

class SplitMix64:
    """SplitMix64 PRNG; see module docstring for the exact algorithm."""

    _MASK = (1 << 64) - 1

    def __init__(self, seed: int) -> None:
        self._state = seed & self._MASK

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & self._MASK
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self._MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self._MASK
        return z ^ (z >> 31)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        return lo + (hi - lo) * ((self.next_u64() >> 11) / float(1 << 53))


# Per-kind noise streams decorrelate by seed offset; SplitMix64 mixes nearby seeds.
_KIND_SEED_OFFSET = {KIND_FT: 0, KIND_IMU: 1, KIND_HALL: 2, KIND_FORCE: 3, KIND_POSE: 4}


def _rest_imu_frame(t_us: int, rng: SplitMix64, overrides: dict[str, ImuSensor] | None = None) -> ImuFrame:
    from .model import IMU_SENSORS

    sensors = []
    for name in IMU_SENSORS:
        if overrides and name in overrides:
            sensors.append(overrides[name])
            # keep the noise stream aligned regardless of overrides
            for _ in range(6):
                rng.next_u64()
            continue
        gyro = tuple(rng.uniform(-0.1, 0.1) for _ in range(3))
        accel = (
            rng.uniform(-0.02, 0.02),
            rng.uniform(-0.02, 0.02),
            -9.81 + rng.uniform(-0.02, 0.02),
        )
        sensors.append(ImuSensor(gyro, accel))
    return ImuFrame(t_us, tuple(sensors))


def _consistent_sensor(rate_dps: float, angle_deg: float) -> ImuSensor:
    """Flexion about local x at rate_dps with gravity consistent with angle_deg."""
    a = math.radians(angle_deg)
    return ImuSensor((rate_dps, 0.0, 0.0), (0.0, -9.81 * math.sin(a), -9.81 * math.cos(a)))


def gen_synthetic(
    scenario: str, duration_s: float, seed: int, cfg: PipelineConfig
) -> dict[str, TraceSource]:
    """Generate the full source set (ft, imu, hall, force, pose) for a scenario.

    step_press: fz ramps up over [0.5 s, 1.0 s] then holds at 5 N (a sustained
        fingertip press); the index fingertip force follows the applied fz.
    swing: 1 Hz circular fy/fx at 3 N with phase-locked tx/ty at a 0.15 m
        torque arm (a mass swung on a string), constant small fz.
    pinch: thumb and index close at 40 deg/s early on while the Hall reading
        ramps from 0 to full scale and holds, ending at or above h_high.
    """
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; known: {', '.join(SCENARIOS)}")
    if duration_s <= 0:
        raise ValueError(f"duration must be positive, got {duration_s}")

    tick_us = cfg.tick_us
    n = round(duration_s * cfg.tick_rate_hz)
    rngs = {k: SplitMix64(seed + off) for k, off in _KIND_SEED_OFFSET.items()}
    name = f"<synthetic:{scenario}:{seed}>"

    ft: list[Wrench] = []
    imu: list[ImuFrame] = []
    hall: list[HallSample] = []
    force: list[FingertipForces] = []
    pose: list[PoseSample] = []

    # pinch scenario finger state, integrated alongside generation
    thumb_angle = 0.0
    index_angle = 0.0

    def fnoise(rng: SplitMix64, amp: float = 0.02) -> float:
        return rng.uniform(-amp, amp)

    for i in range(n):
        t_us = i * tick_us
        t = t_us / 1e6
        ftr, imur, hallr, forcer = (rngs[k] for k in (KIND_FT, KIND_IMU, KIND_HALL, KIND_FORCE))

        if scenario == "step_press":
            if t < 0.5:
                fz = 0.0
            elif t < 1.0:
                fz = 5.0 * (t - 0.5) / 0.5
            else:
                fz = 5.0
            w = Wrench(
                t_us,
                fnoise(ftr),
                fnoise(ftr),
                fz + fnoise(ftr),
                fnoise(ftr, 0.005),
                fnoise(ftr, 0.005),
                fnoise(ftr, 0.005),
            )
            frame = _rest_imu_frame(t_us, imur)
            h = HallSample(t_us, max(0.0, hallr.uniform(0.0, 50.0)))
            tip = max(0.0, 0.3 * fz + fnoise(forcer, 0.01))
            f = FingertipForces(t_us, (0.0, tip, 0.0, 0.0, 0.0))
            p = PoseSample(
                t_us,
                (0.4, 0.0, 0.3 + 0.02 * math.sin(2 * math.pi * 0.1 * t), 0.0, 0.0, 0.0)
                + (0.0,) * 6,
            )

        elif scenario == "swing":
            fy = 3.0 * math.sin(2 * math.pi * 1.0 * t)
            fx = 3.0 * math.cos(2 * math.pi * 1.0 * t)
            w = Wrench(
                t_us,
                fx + fnoise(ftr),
                fy + fnoise(ftr),
                0.5 + fnoise(ftr),
                0.15 * fy + fnoise(ftr, 0.005),
                0.15 * fx + fnoise(ftr, 0.005),
                0.1 * math.sin(2 * math.pi * 0.5 * t) + fnoise(ftr, 0.005),
            )
            frame = _rest_imu_frame(t_us, imur)
            h = HallSample(t_us, max(0.0, hallr.uniform(0.0, 50.0)))
            f = FingertipForces(t_us, tuple(max(0.0, fnoise(forcer, 0.01)) for _ in range(5)))
            p = PoseSample(
                t_us,
                (
                    0.4 + 0.05 * math.sin(2 * math.pi * t),
                    0.05 * math.cos(2 * math.pi * t),
                    0.3,
                    0.0,
                    0.0,
                    0.0,
                )
                + (0.0,) * 6,
            )

        else:  # pinch
            close_end = 0.5 * duration_s
            rate = 40.0 if 0.1 * duration_s <= t < close_end else 0.0
            dt = tick_us / 1e6
            thumb_angle = min(cfg.bend_max, thumb_angle + rate * dt)
            index_angle = min(cfg.bend_max, index_angle + rate * dt)
            overrides = {
                "thumb": _consistent_sensor(rate, thumb_angle),
                "index": _consistent_sensor(rate, index_angle),
            }
            frame = _rest_imu_frame(t_us, imur, overrides)
            w = Wrench(t_us, *(fnoise(ftr, 0.01) for _ in range(6)))
            ramp_start, ramp_end = 0.2 * duration_s, 0.8 * duration_s
            if t < ramp_start:
                base = 0.0
            elif t < ramp_end:
                base = cfg.hall_adc_max * (t - ramp_start) / (ramp_end - ramp_start)
            else:
                base = cfg.hall_adc_max
            h_val = min(cfg.hall_adc_max, max(0.0, base + hallr.uniform(-10.0, 10.0)))
            if t >= ramp_end or i == n - 1:
                h_val = cfg.hall_adc_max  # contract: trace ends at or above h_high
            h = HallSample(t_us, h_val)
            touching = base >= cfg.h_high
            grip = 0.8 if touching else 0.0
            f = FingertipForces(t_us, (grip, grip, 0.0, 0.0, 0.0))
            p = PoseSample(t_us, (0.4, 0.0, 0.3, 0.0, 0.0, 0.0) + (0.0,) * 6)

        ft.append(w)
        imu.append(frame)
        hall.append(h)
        force.append(f)
        pose.append(p)

    return {
        KIND_FT: TraceSource(KIND_FT, ft, name=name),
        KIND_IMU: TraceSource(KIND_IMU, imu, name=name),
        KIND_HALL: TraceSource(KIND_HALL, hall, name=name),
        KIND_FORCE: TraceSource(KIND_FORCE, force, name=name),
        KIND_POSE: TraceSource(KIND_POSE, pose, name=name),
    }
