"""wrenchlink: deterministic teleoperation feedback pipeline over simulated devices.

Wrench-to-servo force rendering, IMU finger retargeting with Hall-sensor
pinch calibration, and fingertip vibrotactile mapping, orchestrated as a
fixed-rate loop with trace replay, episode recording, and a live stream
protocol for telemetry and parameter tuning.
"""

from .config import (
    ConfigError,
    PipelineConfig,
    apply_patch,
    config_schema,
    config_sha256,
    default_config,
    dumps_config,
    load_config,
    loads_config,
    save_config,
)
from .fusion import FingerFusion, accel_angle, adaptive_alpha
from .haptics import map_haptics
from .model import (
    FingerAngles,
    FingertipForces,
    HallSample,
    HapticCommand,
    ImuFrame,
    ImuSensor,
    PinchState,
    ServoCommand,
    SimClock,
    Wrench,
    sim_clock_advance,
)
from .pipeline import (
    EpisodeRecord,
    Pipeline,
    TickReport,
    bench,
    read_episode,
    run_session,
    verify_command_log,
)
from .simbus import (
    CommandLog,
    PoseSample,
    SplitMix64,
    TraceError,
    TraceSource,
    gen_synthetic,
    load_trace,
    loads_trace,
    sample_at,
)
from .stream import StreamServer, serve_stream
from .wrench_map import (
    WrenchFilter,
    component_weights,
    dynamic_coefficient,
    encode_wrench,
    filter_wrench,
    servo_increments,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "PipelineConfig",
    "apply_patch",
    "config_schema",
    "config_sha256",
    "default_config",
    "dumps_config",
    "load_config",
    "loads_config",
    "save_config",
    "FingerFusion",
    "accel_angle",
    "adaptive_alpha",
    "map_haptics",
    "FingerAngles",
    "FingertipForces",
    "HallSample",
    "HapticCommand",
    "ImuFrame",
    "ImuSensor",
    "PinchState",
    "ServoCommand",
    "SimClock",
    "Wrench",
    "sim_clock_advance",
    "EpisodeRecord",
    "Pipeline",
    "TickReport",
    "bench",
    "read_episode",
    "run_session",
    "verify_command_log",
    "CommandLog",
    "PoseSample",
    "SplitMix64",
    "TraceError",
    "TraceSource",
    "gen_synthetic",
    "load_trace",
    "loads_trace",
    "sample_at",
    "StreamServer",
    "serve_stream",
    "WrenchFilter",
    "component_weights",
    "dynamic_coefficient",
    "encode_wrench",
    "filter_wrench",
    "servo_increments",
]
