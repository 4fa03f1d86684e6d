"""Launch profiles: TOML in, validated dataclasses out.

A profile describes the whole system: gateway address, output root,
clock mode, and one ``[[arm]]`` table per namespace (planner, workspace,
simulated arm, recorder, cameras, endpoint).  The default document below
is the canonical reference — ``config print-default`` emits it verbatim,
and the parser round-trips it, so defaults can never drift from docs.

Bimanual operation is purely a profile change: two ``[[arm]]`` tables
with ``/left`` and ``/right`` namespaces, same code everywhere.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .camera import CameraConfig
from .planner import PlannerConfig, WorkspaceBounds
from .posemath import AxisMap
from .recorder import RecorderConfig
from .simarm import SimArmConfig

DEFAULT_TOML = """\
# teleopkit launch profile (defaults)

clock = "wall"              # "wall" for live use, "virtual" for deterministic runs
seed = 0                    # master seed for synthetic cameras / scripted drivers
task = "teleop demonstration"

[gateway]
host = "127.0.0.1"
port = 9090
nominal_rate_hz = 50.0      # expected phone pose rate, used by rate monitoring

[output]
root = "./dataset"
video_mode = "mp4"          # "mp4" | "images" (lossless PNG fallback)

[[arm]]
namespace = ""              # "" single-arm; "/left" & "/right" for bimanual
endpoint = "inproc"         # "inproc" sim | "tcp" wire protocol
tcp_host = "127.0.0.1"
tcp_port = 29999

[arm.planner]
axis_map = "x=x,y=y,z=z"    # phone axes -> robot axes, signed permutation
scale = 1.0                 # phone meters -> robot meters
jump_threshold_m = 0.06     # zero-jump filter distance
rotation_enabled = true
gripper_debounce_ms = 150.0
max_rotation_step_rad = 0.35

[arm.workspace]
x = [0.15, 0.65]
y = [-0.40, 0.40]
z = [0.05, 0.60]

[arm.sim]
lag_time_constant_s = 0.25
max_cartesian_speed_mps = 0.5
transport_delay_s = 0.02
feedback_rate_hz = 100.0
home = [0.40, 0.0, 0.30]

[arm.recorder]
freshness_window_ms = 50.0
memory_ceiling_mb = 512
cameras = ["cam_front"]
camera_width = 160
camera_height = 120
"""


class ConfigError(Exception):
    """Invalid profile; message names the offending field."""


@dataclass(frozen=True)
class ArmProfile:
    namespace: str
    planner: PlannerConfig
    scale: float
    sim: SimArmConfig
    recorder: RecorderConfig
    cameras: tuple[CameraConfig, ...]
    endpoint: str = "inproc"
    tcp_host: str = "127.0.0.1"
    tcp_port: int = 29999


@dataclass(frozen=True)
class LaunchProfile:
    clock: str = "wall"
    seed: int = 0
    task: str = "teleop demonstration"
    gateway_host: str = "127.0.0.1"
    gateway_port: int = 9090
    nominal_rate_hz: float = 50.0
    output_root: str = "./dataset"
    video_mode: str = "mp4"
    arms: tuple[ArmProfile, ...] = field(default_factory=tuple)


def _get(table: dict, key: str, kind, where: str):
    if key not in table:
        raise ConfigError(f"missing field {where}.{key}")
    value = table[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ConfigError(f"{where}.{key} must be {kind.__name__}, got {value!r}")
    return value


def _interval(table: dict, key: str, where: str) -> tuple[float, float]:
    value = _get(table, key, list, where)
    if len(value) != 2 or not all(isinstance(v, (int, float)) for v in value):
        raise ConfigError(f"{where}.{key} must be [lo, hi]")
    return float(value[0]), float(value[1])


def _parse_arm(table: dict, index: int, seed: int) -> ArmProfile:
    where = f"arm[{index}]"
    namespace = _get(table, "namespace", str, where)

    p = table.get("planner", {})
    w = table.get("workspace", {})
    s = table.get("sim", {})
    r = table.get("recorder", {})
    try:
        scale = _get(p, "scale", float, f"{where}.planner") if "scale" in p else 1.0
        axis_map = AxisMap.from_spec(_get(p, "axis_map", str, f"{where}.planner"), scale)
        workspace = WorkspaceBounds(
            x=_interval(w, "x", f"{where}.workspace"),
            y=_interval(w, "y", f"{where}.workspace"),
            z=_interval(w, "z", f"{where}.workspace"),
        )
        planner = PlannerConfig(
            axis_map=axis_map,
            workspace=workspace,
            jump_threshold=_get(p, "jump_threshold_m", float, f"{where}.planner"),
            rotation_enabled=_get(p, "rotation_enabled", bool, f"{where}.planner"),
            gripper_debounce_ms=_get(p, "gripper_debounce_ms", float, f"{where}.planner"),
            max_rotation_step=_get(p, "max_rotation_step_rad", float, f"{where}.planner"),
        )
        home = _get(s, "home", list, f"{where}.sim")
        if len(home) != 3:
            raise ConfigError(f"{where}.sim.home must be [x, y, z]")
        sim = SimArmConfig(
            lag_time_constant=_get(s, "lag_time_constant_s", float, f"{where}.sim"),
            max_cartesian_speed=_get(s, "max_cartesian_speed_mps", float, f"{where}.sim"),
            transport_delay=_get(s, "transport_delay_s", float, f"{where}.sim"),
            feedback_rate=_get(s, "feedback_rate_hz", float, f"{where}.sim"),
            home_position=tuple(float(v) for v in home),
        )
        recorder = RecorderConfig(
            freshness_window_s=_get(r, "freshness_window_ms", float, f"{where}.recorder") / 1e3,
            memory_ceiling_bytes=int(
                _get(r, "memory_ceiling_mb", float, f"{where}.recorder") * 1024 * 1024
            ),
        )
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None

    camera_names = _get(r, "cameras", list, f"{where}.recorder")
    if not camera_names or not all(isinstance(n, str) for n in camera_names):
        raise ConfigError(f"{where}.recorder.cameras must be a non-empty string list")
    width = int(_get(r, "camera_width", float, f"{where}.recorder"))
    height = int(_get(r, "camera_height", float, f"{where}.recorder"))
    cameras = tuple(
        CameraConfig(name=name, width=width, height=height, seed=seed + i)
        for i, name in enumerate(camera_names)
    )

    endpoint = table.get("endpoint", "inproc")
    if endpoint not in ("inproc", "tcp"):
        raise ConfigError(f"{where}.endpoint must be 'inproc' or 'tcp', got {endpoint!r}")
    return ArmProfile(
        namespace=namespace,
        planner=planner,
        scale=scale,
        sim=sim,
        recorder=recorder,
        cameras=cameras,
        endpoint=endpoint,
        tcp_host=table.get("tcp_host", "127.0.0.1"),
        tcp_port=table.get("tcp_port", 29999),
    )


def parse_profile(text: str) -> LaunchProfile:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error: {exc}") from None

    clock = doc.get("clock", "wall")
    if clock not in ("wall", "virtual"):
        raise ConfigError(f"clock must be 'wall' or 'virtual', got {clock!r}")
    video_mode = doc.get("output", {}).get("video_mode", "mp4")
    if video_mode not in ("mp4", "images"):
        raise ConfigError(f"output.video_mode must be 'mp4' or 'images', got {video_mode!r}")

    seed = doc.get("seed", 0)
    arm_tables = doc.get("arm", [])
    if not arm_tables:
        raise ConfigError("profile needs at least one [[arm]] table")
    arms = tuple(_parse_arm(t, i, seed + 100 * i) for i, t in enumerate(arm_tables))
    namespaces = [a.namespace for a in arms]
    if len(set(namespaces)) != len(namespaces):
        raise ConfigError(f"duplicate namespaces in profile: {namespaces}")

    gw = doc.get("gateway", {})
    out = doc.get("output", {})
    return LaunchProfile(
        clock=clock,
        seed=seed,
        task=doc.get("task", "teleop demonstration"),
        gateway_host=gw.get("host", "127.0.0.1"),
        gateway_port=gw.get("port", 9090),
        nominal_rate_hz=float(gw.get("nominal_rate_hz", 50.0)),
        output_root=out.get("root", "./dataset"),
        video_mode=video_mode,
        arms=arms,
    )


def load_profile(path: str | Path) -> LaunchProfile:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read profile {path}: {exc}") from None
    return parse_profile(text)


def default_profile() -> LaunchProfile:
    return parse_profile(DEFAULT_TOML)


def default_toml() -> str:
    return DEFAULT_TOML


def bimanual_toml() -> str:
    """Default profile with the arm table cloned under /left and /right."""
    doc = tomllib.loads(DEFAULT_TOML)
    base = doc["arm"][0]
    lines = []
    for ns in ("/left", "/right"):
        arm = copy.deepcopy(base)
        arm["namespace"] = ns
        lines.append(_arm_toml(arm))
    head = DEFAULT_TOML.split("[[arm]]", 1)[0]
    return head + "\n".join(lines)


def _arm_toml(arm: dict) -> str:
    """Serialize one arm table back to TOML (values are simple types)."""

    def fmt(v) -> str:
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            return f'"{v}"'
        if isinstance(v, list):
            return "[" + ", ".join(fmt(x) for x in v) + "]"
        return repr(v)

    out = ["[[arm]]"]
    for key, value in arm.items():
        if not isinstance(value, dict):
            out.append(f"{key} = {fmt(value)}")
    for sub in ("planner", "workspace", "sim", "recorder"):
        if sub in arm:
            out.append(f"\n[arm.{sub}]")
            out += [f"{k} = {fmt(v)}" for k, v in arm[sub].items()]
    out.append("")
    return "\n".join(out)
