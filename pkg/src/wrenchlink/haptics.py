"""Fingertip force to ERM vibration duty mapping."""

from __future__ import annotations

from .config import PipelineConfig
from .model import FingertipForces, HapticCommand


def map_haptics(forces: FingertipForces, cfg: PipelineConfig) -> HapticCommand:
    """Linear map duty_i = clamp(gain * f_i / force_max, 0, 1) per fingertip.

    Duty is a fraction; the (simulated) driver owns any PWM register scaling.
    """
    duty = tuple(
        min(1.0, max(0.0, cfg.haptic_gain * f / cfg.haptic_force_max)) for f in forces.force
    )
    return HapticCommand(forces.t_us, duty)
