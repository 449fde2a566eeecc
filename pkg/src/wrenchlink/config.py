"""Pipeline configuration: schema, defaults, INI file round-trip, validation.

The config file is a hand-editable INI with one section per subsystem; every
key maps 1:1 to a ``PipelineConfig`` field. Missing keys fall back to the
documented defaults so operators only write what they tune. Sensitivities
(kappa_*) and the ratio parameters are expected to be re-tuned per task.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, fields, replace

from .model import FINGERS


class ConfigError(ValueError):
    """Malformed or invariant-violating configuration."""


# Wrench base components in canonical order; weights and sign columns follow it.
BASE_COMPONENTS = ("fx", "fy", "fz", "tz")


@dataclass(frozen=True)
class PipelineConfig:
    # [servo] no-load angles and mechanical limits, degrees
    theta_init: tuple[float, float, float, float] = (180.0, 180.0, 180.0, 180.0)
    angle_min: float = 90.0
    angle_max: float = 270.0

    # [wrench] encoding sensitivities (deg/N, deg/(N*m)) and sign placement.
    # sign_* columns list the per-servo sign of that component's contribution;
    # servos 1,2 sit above the forearm, 3,4 below.
    kappa_fx: float = 10.0
    kappa_fy: float = 10.0
    kappa_fz: float = 10.0
    kappa_tz: float = 20.0
    sign_fx: tuple[int, int, int, int] = (1, -1, 1, -1)
    sign_fy: tuple[int, int, int, int] = (1, 1, -1, -1)
    sign_fz: tuple[int, int, int, int] = (1, 1, 1, 1)
    sign_tz: tuple[int, int, int, int] = (1, -1, -1, 1)
    # torque/force ratio modulation: c = max(c_min, 1 + sigma*kappa_r*(r + delta))
    kappa_r: float = 5.0
    sigma_fy: tuple[int, int, int, int] = (1, 1, -1, -1)
    sigma_fx: tuple[int, int, int, int] = (1, 1, -1, -1)
    delta: float = 0.0
    c_min: float = 0.2
    weight_epsilon: float = 1e-3
    # innovation-adaptive input filter window, in samples
    tw_short: int = 3
    tw_long: int = 20
    tw_innovation_threshold: float = 1.0

    # [fusion] complementary filter and finger geometry
    alpha_base: float = 0.98
    alpha_floor: float = 0.9
    accel_trust_band: float = 2.0
    ma_window: int = 6
    bend_min: float = 0.0
    bend_max: float = 120.0
    flexion_axis: tuple[str, str, str, str, str] = ("x", "x", "x", "x", "x")
    gyro_damping: float = 0.995

    # [hall] pinch calibration thresholds, ADC counts
    h_low: float = 1800.0
    h_high: float = 3000.0
    hall_adc_max: float = 4095.0
    hall_lp_cutoff: float = 0.3
    contact_thumb: float = 50.0
    contact_index: float = 55.0

    # [haptic] linear force -> duty map
    haptic_gain: float = 1.0
    haptic_force_max: float = 2.0

    # [loop]
    tick_rate_hz: float = 100.0
    stream_decimation: int = 1

    def kappa(self, component: str) -> float:
        return {
            "fx": self.kappa_fx,
            "fy": self.kappa_fy,
            "fz": self.kappa_fz,
            "tz": self.kappa_tz,
        }[component]

    def sign_column(self, component: str) -> tuple[int, int, int, int]:
        return {
            "fx": self.sign_fx,
            "fy": self.sign_fy,
            "fz": self.sign_fz,
            "tz": self.sign_tz,
        }[component]

    @property
    def sign_matrix(self) -> tuple[tuple[int, int, int, int], ...]:
        """Rows are servos 1..4, columns (fx, fy, fz, tz)."""
        cols = [self.sign_column(c) for c in BASE_COMPONENTS]
        return tuple(tuple(col[i] for col in cols) for i in range(4))

    @property
    def tick_us(self) -> int:
        return round(1_000_000 / self.tick_rate_hz)

    def validate(self) -> "PipelineConfig":
        """Check every invariant; raise ConfigError naming the first violated one."""
        checks: list[tuple[bool, str]] = [
            (self.tick_rate_hz > 0, "tick_rate_hz > 0"),
            (self.angle_min < self.angle_max, "angle_min < angle_max"),
            (
                all(all(s in (-1, 0, 1) for s in self.sign_column(c)) for c in BASE_COMPONENTS),
                "sign matrix entries in {-1, 0, +1}",
            ),
            (
                all(s in (-1, 1) for s in self.sigma_fy + self.sigma_fx),
                "sigma entries in {-1, +1}",
            ),
            (self.c_min > 0, "c_min > 0"),
            (self.weight_epsilon > 0, "weight_epsilon > 0"),
            (self.ma_window >= 1, "ma_window >= 1"),
            (1 <= self.tw_short <= self.tw_long, "1 <= tw_short <= tw_long"),
            (self.tw_innovation_threshold >= 0, "tw_innovation_threshold >= 0"),
            (0.0 <= self.alpha_base <= 1.0, "0 <= alpha_base <= 1"),
            (0.0 <= self.alpha_floor <= 1.0, "0 <= alpha_floor <= 1"),
            (self.accel_trust_band > 0, "accel_trust_band > 0"),
            (self.bend_min < self.bend_max, "bend_min < bend_max"),
            (
                all(a in ("x", "y", "z") for a in self.flexion_axis),
                "flexion_axis entries in {x, y, z}",
            ),
            (0.0 < self.gyro_damping <= 1.0, "0 < gyro_damping <= 1"),
            (self.h_low < self.h_high, "h_low < h_high"),
            (self.h_low >= 0, "h_low >= 0"),
            (self.hall_adc_max > 0, "hall_adc_max > 0"),
            (self.h_high <= self.hall_adc_max, "h_high <= hall_adc_max"),
            (0.0 < self.hall_lp_cutoff <= 1.0, "0 < hall_lp_cutoff <= 1"),
            (
                all(self.angle_min <= t <= self.angle_max for t in self.theta_init),
                "theta_init within [angle_min, angle_max]",
            ),
            (
                all(self.bend_min <= a <= self.bend_max for a in (self.contact_thumb, self.contact_index)),
                "contact angles within [bend_min, bend_max]",
            ),
            (self.haptic_gain >= 0, "haptic_gain >= 0"),
            (self.haptic_force_max > 0, "haptic_force_max > 0"),
            (self.stream_decimation >= 1, "stream_decimation >= 1"),
        ]
        for ok, invariant in checks:
            if not ok:
                raise ConfigError(f"config invariant violated: {invariant}")
        return self


# field name -> (INI section, value kind). Kinds drive generic parse/dump.
_SECTIONS: dict[str, tuple[str, str]] = {
    "theta_init": ("servo", "float4"),
    "angle_min": ("servo", "float"),
    "angle_max": ("servo", "float"),
    "kappa_fx": ("wrench", "float"),
    "kappa_fy": ("wrench", "float"),
    "kappa_fz": ("wrench", "float"),
    "kappa_tz": ("wrench", "float"),
    "sign_fx": ("wrench", "int4"),
    "sign_fy": ("wrench", "int4"),
    "sign_fz": ("wrench", "int4"),
    "sign_tz": ("wrench", "int4"),
    "kappa_r": ("wrench", "float"),
    "sigma_fy": ("wrench", "int4"),
    "sigma_fx": ("wrench", "int4"),
    "delta": ("wrench", "float"),
    "c_min": ("wrench", "float"),
    "weight_epsilon": ("wrench", "float"),
    "tw_short": ("wrench", "int"),
    "tw_long": ("wrench", "int"),
    "tw_innovation_threshold": ("wrench", "float"),
    "alpha_base": ("fusion", "float"),
    "alpha_floor": ("fusion", "float"),
    "accel_trust_band": ("fusion", "float"),
    "ma_window": ("fusion", "int"),
    "bend_min": ("fusion", "float"),
    "bend_max": ("fusion", "float"),
    "flexion_axis": ("fusion", "axis5"),
    "gyro_damping": ("fusion", "float"),
    "h_low": ("hall", "float"),
    "h_high": ("hall", "float"),
    "hall_adc_max": ("hall", "float"),
    "hall_lp_cutoff": ("hall", "float"),
    "contact_thumb": ("hall", "float"),
    "contact_index": ("hall", "float"),
    "haptic_gain": ("haptic", "float"),
    "haptic_force_max": ("haptic", "float"),
    "tick_rate_hz": ("loop", "float"),
    "stream_decimation": ("loop", "int"),
}

_SECTION_ORDER = ("servo", "wrench", "fusion", "hall", "haptic", "loop")

# Numeric scalars an operator may patch live over the stream protocol. Structural
# parameters (rates, buffer capacities, vectors) are fixed for a session.
PATCHABLE_FIELDS = frozenset(
    name
    for name, (_, kind) in _SECTIONS.items()
    if kind in ("float", "int") and name not in ("tick_rate_hz", "ma_window", "tw_long")
)


def _parse_value(name: str, kind: str, raw: str):
    parts = [p.strip() for p in raw.split(",")] if "," in raw else [raw.strip()]
    try:
        if kind == "float":
            return float(raw)
        if kind == "int":
            return int(raw)
        if kind == "float4":
            values = tuple(float(p) for p in parts)
        elif kind == "int4":
            values = tuple(int(p) for p in parts)
        elif kind == "axis5":
            values = tuple(parts)
        else:  # pragma: no cover - schema table is static
            raise AssertionError(kind)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc
    expected = 5 if kind == "axis5" else 4
    if len(values) != expected:
        raise ConfigError(f"{name} must have {expected} comma-separated entries, got {len(values)}")
    return values


def _format_value(kind: str, value) -> str:
    if kind in ("float4", "int4", "axis5"):
        return ", ".join(repr(v) if isinstance(v, float) else str(v) for v in value)
    if kind == "float":
        return repr(float(value))
    return str(value)


def default_config() -> PipelineConfig:
    return PipelineConfig().validate()


def loads_config(text: str, source: str = "<string>") -> PipelineConfig:
    """Parse INI text into a validated PipelineConfig."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {source}: {exc}") from exc

    values: dict[str, object] = {}
    for section in parser.sections():
        if section not in _SECTION_ORDER:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SECTIONS or _SECTIONS[key][0] != section:
                raise ConfigError(f"unknown config key {key!r} in section [{section}]")
            values[key] = _parse_value(key, _SECTIONS[key][1], raw)
    return PipelineConfig(**values).validate()


def load_config(path: str) -> PipelineConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads_config(text, source=str(path))


def dumps_config(cfg: PipelineConfig) -> str:
    """Serialize to canonical INI text; reparses to an identical value."""
    out = io.StringIO()
    out.write("# wrenchlink pipeline configuration\n")
    for section in _SECTION_ORDER:
        out.write(f"\n[{section}]\n")
        for field in fields(PipelineConfig):
            sec, kind = _SECTIONS[field.name]
            if sec != section:
                continue
            out.write(f"{field.name} = {_format_value(kind, getattr(cfg, field.name))}\n")
    return out.getvalue()


def save_config(cfg: PipelineConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_config(cfg))


def config_sha256(cfg: PipelineConfig) -> str:
    return hashlib.sha256(dumps_config(cfg).encode("utf-8")).hexdigest()


def apply_patch(cfg: PipelineConfig, patch: dict) -> PipelineConfig:
    """Return a new validated config with the patch applied.

    Rejects the whole patch (raising ConfigError) on any unknown field,
    non-patchable field, bad value, or violated invariant; the caller keeps
    the previous config in that case.
    """
    if not isinstance(patch, dict) or not patch:
        raise ConfigError("config_patch requires a non-empty field map")
    updates: dict[str, object] = {}
    for name, value in patch.items():
        if name not in _SECTIONS:
            raise ConfigError(f"unknown config field {name!r}")
        if name not in PATCHABLE_FIELDS:
            raise ConfigError(f"config field {name!r} is not patchable at runtime")
        kind = _SECTIONS[name][1]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"config field {name!r} requires a number, got {value!r}")
        updates[name] = int(value) if kind == "int" else float(value)
    return replace(cfg, **updates).validate()


def config_schema(cfg: PipelineConfig) -> list[dict]:
    """Describe every config field for schema-driven clients (the hello message)."""
    schema = []
    for field in fields(PipelineConfig):
        section, kind = _SECTIONS[field.name]
        value = getattr(cfg, field.name)
        schema.append(
            {
                "name": field.name,
                "section": section,
                "kind": kind,
                "value": list(value) if isinstance(value, tuple) else value,
                "patchable": field.name in PATCHABLE_FIELDS,
            }
        )
    return schema
