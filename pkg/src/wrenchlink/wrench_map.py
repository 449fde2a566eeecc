"""Wrench-to-servo encoding with ratio-driven dynamic coefficients.

Each servo target is the no-load angle plus a weighted sum of the four base
wrench components (fx, fy, fz, tz). The fy and fx contributions are modulated
by a coefficient derived from the paired torque/force ratio (tx/fy, ty/fx),
which renders contact points nearer or farther from the wrist as asymmetric
servo rotations. Inputs pass through an innovation-adaptive moving-average
filter: the window snaps short on sudden changes and grows under sustained
load, so the device is both responsive and steady.
"""

from __future__ import annotations

from collections import deque

from .config import BASE_COMPONENTS, PipelineConfig
from .model import ServoCommand, Wrench


def dynamic_coefficient(tau: float, f: float, sigma: int, cfg: PipelineConfig) -> float:
    """Ratio coefficient max(c_min, 1 + sigma*kappa_r*(tau/f + delta)).

    A force magnitude below weight_epsilon makes the ratio meaningless;
    the coefficient is then exactly 1 (neutral) to keep output bounded.
    """
    if abs(f) < cfg.weight_epsilon:
        return 1.0
    r = tau / f
    return max(cfg.c_min, 1.0 + sigma * cfg.kappa_r * (r + cfg.delta))


def component_weights(w: Wrench, cfg: PipelineConfig) -> tuple[float, float, float, float]:
    """Proportional weights of (fx, fy, fz, tz) by absolute magnitude.

    All-zero (sum below weight_epsilon) yields all-zero weights.
    """
    values = (abs(w.fx), abs(w.fy), abs(w.fz), abs(w.tz))
    total = sum(values)
    if total < cfg.weight_epsilon:
        return (0.0, 0.0, 0.0, 0.0)
    return tuple(v / total for v in values)


def _coefficient_for(w: Wrench, component: str, servo: int, cfg: PipelineConfig) -> float:
    # Only the in-plane force components carry a ratio coefficient.
    if component == "fy":
        return dynamic_coefficient(w.tx, w.fy, cfg.sigma_fy[servo], cfg)
    if component == "fx":
        return dynamic_coefficient(w.ty, w.fx, cfg.sigma_fx[servo], cfg)
    return 1.0


def servo_increments(w: Wrench, cfg: PipelineConfig) -> tuple[float, float, float, float]:
    """Pre-clamp angle increments (degrees) for servos 1..4."""
    weights = component_weights(w, cfg)
    values = (w.fx, w.fy, w.fz, w.tz)
    increments = []
    for servo in range(4):
        total = 0.0
        for idx, component in enumerate(BASE_COMPONENTS):
            sign = cfg.sign_column(component)[servo]
            if sign == 0 or weights[idx] == 0.0:
                continue
            c = _coefficient_for(w, component, servo, cfg)
            total += weights[idx] * cfg.kappa(component) * sign * c * values[idx]
        increments.append(total)
    return tuple(increments)


def encode_wrench(w: Wrench, cfg: PipelineConfig) -> ServoCommand:
    """Encode a (filtered) wrench into clamped servo position targets."""
    increments = servo_increments(w, cfg)
    angles = []
    clamped = []
    for init, inc in zip(cfg.theta_init, increments):
        raw = init + inc
        hit = raw < cfg.angle_min or raw > cfg.angle_max
        angles.append(min(cfg.angle_max, max(cfg.angle_min, raw)))
        clamped.append(hit)
    return ServoCommand(w.t_us, tuple(angles), tuple(clamped))


class WrenchFilter:
    """Innovation-adaptive time-window mean filter over recent wrench samples.

    Single-owner mutable state; one instance per pipeline. The effective
    window length stays in [tw_short, tw_long]: it collapses to tw_short when
    any component jumps past tw_innovation_threshold relative to the last
    output, and otherwise grows by one sample per tick.
    """

    def __init__(self, cfg: PipelineConfig) -> None:
        self._buffer: deque[Wrench] = deque(maxlen=cfg.tw_long)
        self._window = cfg.tw_short
        self._last: Wrench | None = None

    @property
    def window(self) -> int:
        """Current effective window length in samples."""
        return self._window

    @property
    def last_filtered(self) -> Wrench | None:
        return self._last

    def update(self, sample: Wrench, cfg: PipelineConfig) -> Wrench:
        if self._last is not None:
            innovation = max(
                abs(s - f) for s, f in zip(sample.components(), self._last.components())
            )
            if innovation > cfg.tw_innovation_threshold:
                self._window = cfg.tw_short
            else:
                self._window = min(self._window + 1, cfg.tw_long)
        else:
            self._window = cfg.tw_short
        self._buffer.append(sample)

        n = min(self._window, len(self._buffer))
        recent = list(self._buffer)[-n:]
        means = [sum(w.components()[i] for w in recent) / n for i in range(6)]
        filtered = Wrench(sample.t_us, *means)
        self._last = filtered
        return filtered


def filter_wrench(state: WrenchFilter, sample: Wrench, cfg: PipelineConfig) -> tuple[WrenchFilter, Wrench]:
    """Functional wrapper over WrenchFilter.update for one sample."""
    return state, state.update(sample, cfg)
