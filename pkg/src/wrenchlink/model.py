"""Domain value types shared across the pipeline, plus the simulation clock.

All types are immutable value objects; angles are degrees at every interface,
timestamps are integer microseconds on a simulated clock. Units are conventions
enforced by validation and tests, not by a unit library.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

FINGERS = ("thumb", "index", "middle", "ring", "little")
IMU_SENSORS = FINGERS + ("hand_back",)


def _check_finite(owner: str, name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ValueError(f"{owner}.{name} must be finite, got {value!r}")


def _as_float_tuple(owner: str, name: str, values: Iterable[float], n: int) -> tuple[float, ...]:
    out = tuple(float(v) for v in values)
    if len(out) != n:
        raise ValueError(f"{owner}.{name} must have length {n}, got {len(out)}")
    for v in out:
        _check_finite(owner, name, v)
    return out


@dataclass(frozen=True)
class Wrench:
    """One timestamped 6D force-torque sample (forces in N, torques in N*m)."""

    t_us: int
    fx: float
    fy: float
    fz: float
    tx: float
    ty: float
    tz: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "t_us", int(self.t_us))
        if self.t_us < 0:
            raise ValueError(f"Wrench.t_us must be non-negative, got {self.t_us}")
        for name in ("fx", "fy", "fz", "tx", "ty", "tz"):
            value = float(getattr(self, name))
            _check_finite("Wrench", name, value)
            object.__setattr__(self, name, value)

    @classmethod
    def zero(cls, t_us: int = 0) -> "Wrench":
        return cls(t_us, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)

    def components(self) -> tuple[float, float, float, float, float, float]:
        """(fx, fy, fz, tx, ty, tz)."""
        return (self.fx, self.fy, self.fz, self.tx, self.ty, self.tz)


@dataclass(frozen=True)
class ServoCommand:
    """Four servo position targets in degrees with per-servo clamp flags."""

    t_us: int
    angles: tuple[float, float, float, float]
    clamped: tuple[bool, bool, bool, bool]

    def __post_init__(self) -> None:
        object.__setattr__(self, "t_us", int(self.t_us))
        object.__setattr__(self, "angles", _as_float_tuple("ServoCommand", "angles", self.angles, 4))
        flags = tuple(bool(c) for c in self.clamped)
        if len(flags) != 4:
            raise ValueError(f"ServoCommand.clamped must have length 4, got {len(flags)}")
        object.__setattr__(self, "clamped", flags)


@dataclass(frozen=True)
class ImuSensor:
    """One IMU reading: gyro in deg/s, accel (specific force) in m/s^2."""

    gyro: tuple[float, float, float]
    accel: tuple[float, float, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "gyro", _as_float_tuple("ImuSensor", "gyro", self.gyro, 3))
        object.__setattr__(self, "accel", _as_float_tuple("ImuSensor", "accel", self.accel, 3))

    @classmethod
    def at_rest(cls) -> "ImuSensor":
        """Zero rates, gravity along -z (the zero-bend reference orientation)."""
        return cls((0.0, 0.0, 0.0), (0.0, 0.0, -9.81))


@dataclass(frozen=True)
class ImuFrame:
    """Readings from the six glove IMUs, fixed order: thumb..little, hand_back."""

    t_us: int
    sensors: tuple[ImuSensor, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "t_us", int(self.t_us))
        sensors = tuple(self.sensors)
        if len(sensors) != len(IMU_SENSORS):
            raise ValueError(f"ImuFrame.sensors must have exactly {len(IMU_SENSORS)} entries, got {len(sensors)}")
        for s in sensors:
            if not isinstance(s, ImuSensor):
                raise ValueError("ImuFrame.sensors entries must be ImuSensor")
        object.__setattr__(self, "sensors", sensors)

    def sensor(self, name: str) -> ImuSensor:
        return self.sensors[IMU_SENSORS.index(name)]

    @classmethod
    def at_rest(cls, t_us: int = 0) -> "ImuFrame":
        return cls(t_us, tuple(ImuSensor.at_rest() for _ in IMU_SENSORS))


@dataclass(frozen=True)
class HallSample:
    """Raw linear Hall sensor reading in ADC counts (bound checked at ingestion)."""

    t_us: int
    h: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "t_us", int(self.t_us))
        h = float(self.h)
        _check_finite("HallSample", "h", h)
        if h < 0:
            raise ValueError(f"HallSample.h must be >= 0, got {h}")
        object.__setattr__(self, "h", h)


class PinchState(str, Enum):
    FREE = "FREE"
    PROXIMITY = "PROXIMITY"
    CONTACT = "CONTACT"


@dataclass(frozen=True)
class FingerAngles:
    """Five fused bend angles (degrees, thumb..little) plus pinch calibration state."""

    t_us: int
    bend: tuple[float, float, float, float, float]
    pinch_state: PinchState
    pinch_blend: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "t_us", int(self.t_us))
        object.__setattr__(self, "bend", _as_float_tuple("FingerAngles", "bend", self.bend, 5))
        state = PinchState(self.pinch_state)
        object.__setattr__(self, "pinch_state", state)
        blend = float(self.pinch_blend)
        if not 0.0 <= blend <= 1.0:
            raise ValueError(f"FingerAngles.pinch_blend must be in [0, 1], got {blend}")
        if state is PinchState.FREE and blend != 0.0:
            raise ValueError("FingerAngles: pinch_state FREE requires pinch_blend == 0")
        if state is PinchState.CONTACT and blend != 1.0:
            raise ValueError("FingerAngles: pinch_state CONTACT requires pinch_blend == 1")
        object.__setattr__(self, "pinch_blend", blend)


@dataclass(frozen=True)
class HapticCommand:
    """Five fingertip ERM duty-cycle fractions in [0, 1], thumb..little."""

    t_us: int
    duty: tuple[float, float, float, float, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "t_us", int(self.t_us))
        duty = _as_float_tuple("HapticCommand", "duty", self.duty, 5)
        for d in duty:
            if not 0.0 <= d <= 1.0:
                raise ValueError(f"HapticCommand.duty values must be in [0, 1], got {d}")
        object.__setattr__(self, "duty", duty)


@dataclass(frozen=True)
class FingertipForces:
    """Five fingertip normal forces in N, thumb..little; never negative."""

    t_us: int
    force: tuple[float, float, float, float, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "t_us", int(self.t_us))
        force = _as_float_tuple("FingertipForces", "force", self.force, 5)
        for f in force:
            if f < 0:
                raise ValueError(f"FingertipForces.force must be >= 0, got {f}")
        object.__setattr__(self, "force", force)

    @classmethod
    def from_raw(cls, t_us: int, raw: Iterable[float]) -> "FingertipForces":
        """Ingest raw sensor values, clamping negative readings to zero."""
        return cls(t_us, tuple(max(0.0, float(v)) for v in raw))

    @classmethod
    def zero(cls, t_us: int = 0) -> "FingertipForces":
        return cls(t_us, (0.0,) * 5)


@dataclass(frozen=True)
class SimClock:
    """Deterministic integer-microsecond clock; never tied to wall time.

    Advancing is exact integer arithmetic so replays are bit-identical.
    """

    t_us: int
    tick_us: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "t_us", int(self.t_us))
        object.__setattr__(self, "tick_us", int(self.tick_us))
        if self.t_us < 0:
            raise ValueError(f"SimClock.t_us must be non-negative, got {self.t_us}")
        if self.tick_us <= 0:
            raise ValueError(f"SimClock.tick_us must be positive, got {self.tick_us}")

    @classmethod
    def for_rate(cls, tick_rate_hz: float, t_us: int = 0) -> "SimClock":
        return cls(t_us, round(1_000_000 / tick_rate_hz))

    def advance(self, ticks: int) -> "SimClock":
        if ticks < 0:
            raise ValueError(f"ticks must be non-negative, got {ticks}")
        return SimClock(self.t_us + ticks * self.tick_us, self.tick_us)


def sim_clock_advance(clock: SimClock, ticks: int) -> SimClock:
    """Advance the clock by an exact whole number of ticks."""
    return clock.advance(ticks)
