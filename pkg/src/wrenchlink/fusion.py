"""IMU finger fusion and Hall-sensor pinch calibration.

Bend angles for index..little come from a complementary filter blending the
relative gyro rate (fingertip minus hand-back, projected on the finger's
flexion axis) with the gravity angle implied by the fingertip accelerometer:

    theta <- alpha * (theta + d_gyro) + (1 - alpha) * theta_acc

The blend factor adapts to accelerometer trust: it rises to 1 (pure gyro)
as the measured specific-force magnitude departs from gravity. The thumb has
no usable gravity reference across its pose range, so it integrates relative
angular velocity only and relies on the Hall sensor for correction near pinch:
below h_low the fused angles pass through; at h_high and above the thumb and
index snap to the configured contact angles; in between the outputs are the
linear interpolation of the two, driven by a low-pass-smoothed Hall value.

Outputs are smoothed by a short moving average and clamped to the bend range.
"""

from __future__ import annotations

import math
from collections import deque

from .config import PipelineConfig
from .model import FINGERS, HallSample, ImuFrame, ImuSensor, PinchState

GRAVITY = 9.81

# In-plane accelerometer components per flexion axis, cyclic (axis, plane) order.
_PLANE = {"x": (1, 2), "y": (2, 0), "z": (0, 1)}


def _clamp(value: float, lo: float, hi: float) -> float:
    return min(hi, max(lo, value))


def _axis_for(finger: str, cfg: PipelineConfig) -> str:
    return cfg.flexion_axis[FINGERS.index(finger)]


def accel_angle(accel: tuple[float, float, float], finger: str, cfg: PipelineConfig) -> float:
    """Bend angle (degrees) implied by gravity projected on the flexion plane.

    Zero-angle reference is gravity along -z of the sensor; a quarter turn
    about the flexion axis reads 90 degrees.
    """
    a, b = _PLANE[_axis_for(finger, cfg)]
    angle = math.degrees(math.atan2(-accel[a], -accel[b]))
    return _clamp(angle, cfg.bend_min, cfg.bend_max)


def adaptive_alpha(accel: tuple[float, float, float], cfg: PipelineConfig) -> float:
    """Gyro/accel blend factor in [alpha_floor, 1].

    Deviation of |accel| from gravity beyond accel_trust_band means the
    accelerometer is measuring motion, not orientation: alpha = 1 (pure gyro).
    Zero deviation yields alpha_base, linear in between.
    """
    deviation = abs(math.sqrt(sum(v * v for v in accel)) - GRAVITY)
    if deviation > cfg.accel_trust_band:
        alpha = 1.0
    else:
        alpha = cfg.alpha_base + (1.0 - cfg.alpha_base) * (deviation / cfg.accel_trust_band)
    return min(1.0, max(cfg.alpha_floor, alpha))


def _relative_rate(fingertip: ImuSensor, hand_back: ImuSensor, axis: str) -> float:
    """Flexion-axis angular rate of the fingertip relative to the hand back.

    Off-axis gyro components are projected out (cross-axis rejection).
    """
    i = "xyz".index(axis)
    return fingertip.gyro[i] - hand_back.gyro[i]


class FingerFusion:
    """Single-owner fusion state for one glove: five fingers plus Hall smoothing."""

    def __init__(self, cfg: PipelineConfig) -> None:
        self._theta = {finger: 0.0 for finger in FINGERS}
        self._ma = {finger: deque(maxlen=cfg.ma_window) for finger in FINGERS}
        self._hall_smoothed: float | None = None
        self._pinch_state = PinchState.FREE

    @property
    def pinch_state(self) -> PinchState:
        return self._pinch_state

    @property
    def hall_smoothed(self) -> float | None:
        return self._hall_smoothed

    def angle(self, finger: str) -> float:
        """Current fused recurrence angle (pre moving-average)."""
        return self._theta[finger]

    def _smooth(self, finger: str, value: float) -> float:
        buf = self._ma[finger]
        buf.append(value)
        return sum(buf) / len(buf)

    def fuse_finger(self, frame: ImuFrame, finger: str, dt: float, cfg: PipelineConfig) -> float:
        """One complementary-filter step for index..little; returns the bend angle."""
        if finger not in FINGERS[1:]:
            raise ValueError(f"fuse_finger handles index..little, got {finger!r}")
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        tip = frame.sensor(finger)
        back = frame.sensor("hand_back")
        axis = _axis_for(finger, cfg)

        d_gyro = cfg.gyro_damping * _relative_rate(tip, back, axis) * dt
        theta_acc = accel_angle(tip.accel, finger, cfg)
        alpha = adaptive_alpha(tip.accel, cfg)

        theta = alpha * (self._theta[finger] + d_gyro) + (1.0 - alpha) * theta_acc
        theta = _clamp(theta, cfg.bend_min, cfg.bend_max)
        self._theta[finger] = theta
        return self._smooth(finger, theta)

    def fuse_thumb(self, frame: ImuFrame, dt: float, cfg: PipelineConfig) -> float:
        """Relative-gyro integration for the thumb (no accelerometer term)."""
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        tip = frame.sensor("thumb")
        back = frame.sensor("hand_back")
        axis = _axis_for("thumb", cfg)

        theta = self._theta["thumb"] + cfg.gyro_damping * _relative_rate(tip, back, axis) * dt
        theta = _clamp(theta, cfg.bend_min, cfg.bend_max)
        self._theta["thumb"] = theta
        return self._smooth("thumb", theta)

    def calibrate_pinch(
        self,
        hall: HallSample,
        raw_thumb: float,
        raw_index: float,
        cfg: PipelineConfig,
    ) -> tuple[float, float, PinchState, float]:
        """Hall two-threshold correction of the thumb and index angles.

        Returns (thumb, index, pinch_state, blend). The fused recurrence state
        is untouched; the override is applied on the output side only, so
        releasing the pinch returns continuously to the raw angles.
        """
        # Low-pass the raw reading first so the threshold logic sees a smooth h.
        if self._hall_smoothed is None:
            self._hall_smoothed = hall.h
        else:
            self._hall_smoothed = (
                cfg.hall_lp_cutoff * hall.h + (1.0 - cfg.hall_lp_cutoff) * self._hall_smoothed
            )
        h = self._hall_smoothed

        if h < cfg.h_low:
            state, blend = PinchState.FREE, 0.0
            thumb, index = raw_thumb, raw_index
        elif h >= cfg.h_high:
            state, blend = PinchState.CONTACT, 1.0
            thumb, index = cfg.contact_thumb, cfg.contact_index
        else:
            state = PinchState.PROXIMITY
            blend = (h - cfg.h_low) / (cfg.h_high - cfg.h_low)
            thumb = (1.0 - blend) * raw_thumb + blend * cfg.contact_thumb
            index = (1.0 - blend) * raw_index + blend * cfg.contact_index
        self._pinch_state = state
        return thumb, index, state, blend
