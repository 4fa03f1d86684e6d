"""Hardware-agnostic 6-DoF teleoperation and demonstration-recording stack.

Phone-style clients stream poses over WebSocket; a planner with
clutching, workspace clamping and jump filtering turns them into robot
targets; a bridge drives a simulated (or wire-protocol) arm; a 20 Hz
recorder exports LeRobot-layout datasets.  Namespaces isolate arms, so
bimanual rigs are a configuration change, not a code change.
"""

from .bus import (
    DEFAULT_QOS,
    Envelope,
    KEEP_LAST_ONE,
    MessageBus,
    QosProfile,
    Reliability,
    TopicName,
)
from .camera import CameraConfig, ImageSequenceSource, SyntheticCamera
from .clock import Clock, VirtualClock, WallClock, ns_to_s, s_to_ns
from .config import (
    ArmProfile,
    ConfigError,
    LaunchProfile,
    default_profile,
    default_toml,
    load_profile,
    parse_profile,
)
from .dataset import DatasetError, DatasetWriter, Storage
from .gateway import PhoneGateway, RateMonitor, RateReport
from .latency import LatencyReport, LatencyTrial, expected_band, measure_latency
from .messages import (
    ButtonEvent,
    CameraFrame,
    DecodeError,
    GripperCommand,
    PlannerStatus,
    PoseSample,
    RecordControl,
    RecordStatus,
    RobotState,
    SafetyHold,
    TargetPose,
)
from .pipeline import ArmUnit, Pipeline
from .planner import (
    Planner,
    PlannerConfig,
    PlannerNode,
    WorkspaceBounds,
    clamp_workspace,
    zero_jump_filter,
)
from .posemath import (
    AxisMap,
    Quat,
    Rpy,
    Vec3,
    quat_to_rpy,
    rpy_to_quat,
    wrap_angle,
)
from .recorder import (
    ACTION_DIM,
    OBSERVATION_DIM,
    EpisodeRecorder,
    RecorderConfig,
    build_action,
    build_observation,
    sync_gate,
)
from .replay import ReplayDriver, ScriptError, build_pick_place_script, parse_script
from .scheduler import Scheduler
from .simarm import SimArm, SimArmConfig
from .validate import ValidationReport, Violation, validate_dataset
from .wire import MockWireServer, WireCommand, WireState, from_wire_state, to_wire

__version__ = "0.1.0"
