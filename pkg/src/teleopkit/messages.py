"""Typed payloads carried on the bus, plus their JSON wire codecs.

The JSON shapes mirror what a phone-style client sends over the
WebSocket: poses are PoseStamped-like ``{header: {stamp}, pose:
{position, orientation}}`` objects, buttons are ``{button, stamp}``.
Decoders raise `DecodeError` with the offending field so the gateway can
reject a single frame without dropping the connection.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .posemath import Quat, Vec3

# Accept and renormalize mildly denormalized client quaternions; anything
# further off than this is treated as corruption.
QUAT_NORM_TOLERANCE = 0.05


class DecodeError(ValueError):
    """A wire payload failed validation; names the offending field."""


class Button(enum.Enum):
    VOLUME_UP = "volume_up"
    VOLUME_DOWN = "volume_down"


@dataclass(frozen=True)
class PoseSample:
    """One 6-DoF phone pose as received from a client."""

    stamp_ms: float  # client milliseconds since session start, informational
    position: Vec3
    orientation: Quat


@dataclass(frozen=True)
class ButtonEvent:
    button: Button
    stamp_ms: float


@dataclass(frozen=True)
class TargetPose:
    """Absolute Cartesian robot target in the robot base frame."""

    position: Vec3
    orientation: Quat
    stamp_ns: int


@dataclass(frozen=True)
class GripperCommand:
    closed: bool
    stamp_ns: int


@dataclass(frozen=True)
class RobotState:
    """Fed-back end-effector pose, joint vector and gripper state."""

    ee_position: Vec3
    ee_orientation: Quat
    joints: tuple[float, ...]  # 6 joint angles, radians
    gripper_closed: bool
    stamp_ns: int

    def __post_init__(self):
        if len(self.joints) != 6:
            raise ValueError(f"RobotState needs 6 joints, got {len(self.joints)}")


@dataclass(frozen=True)
class PlannerStatus:
    """Planner state echo so clients can show truthful indicators."""

    clutch_engaged: bool
    gripper_closed: bool
    stamp_ns: int


@dataclass(frozen=True)
class RecordControl:
    action: str  # "start" | "stop" | "discard"
    task: str = ""

    def __post_init__(self):
        if self.action not in ("start", "stop", "discard"):
            raise ValueError(f"bad record action {self.action!r}")


@dataclass(frozen=True)
class RecordStatus:
    recording: bool
    frames: int
    episodes: int
    stamp_ns: int


@dataclass(frozen=True)
class BridgeHealth:
    degraded: bool
    reason: str
    stamp_ns: int


@dataclass(frozen=True)
class SafetyHold:
    """Forces the planner's clutch to engaged (e.g. on client reconnect)."""

    reason: str
    stamp_ns: int


@dataclass(frozen=True)
class CameraFrame:
    source: str
    pixels: np.ndarray  # HxWx3 uint8, RGB
    stamp_ns: int


def _require(obj: dict, field: str) -> Any:
    if not isinstance(obj, dict) or field not in obj:
        raise DecodeError(f"missing field {field!r}")
    return obj[field]


def _number(obj: dict, field: str) -> float:
    value = _require(obj, field)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DecodeError(f"field {field!r} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise DecodeError(f"field {field!r} is not finite: {value!r}")
    return float(value)


def decode_pose(msg: dict) -> PoseSample:
    """Decode a PoseStamped-shaped JSON object into a PoseSample.

    The orientation is renormalized when its norm is within
    `QUAT_NORM_TOLERANCE` of 1 and rejected otherwise.
    """
    header = msg.get("header", {})
    stamp = 0.0
    if isinstance(header, dict) and "stamp" in header:
        stamp = _number(header, "stamp")
    pose = _require(msg, "pose")
    pos = _require(pose, "position")
    ori = _require(pose, "orientation")
    position = Vec3(_number(pos, "x"), _number(pos, "y"), _number(pos, "z"))
    w, x, y, z = (_number(ori, k) for k in ("w", "x", "y", "z"))
    norm = math.sqrt(w * w + x * x + y * y + z * z)
    if abs(norm - 1.0) > QUAT_NORM_TOLERANCE:
        raise DecodeError(f"field 'orientation' norm {norm:.4f} outside tolerance")
    return PoseSample(stamp_ms=stamp, position=position, orientation=Quat(w, x, y, z))


def encode_pose(sample: PoseSample) -> dict:
    return {
        "header": {"stamp": sample.stamp_ms},
        "pose": {
            "position": {"x": sample.position.x, "y": sample.position.y, "z": sample.position.z},
            "orientation": {
                "w": sample.orientation.w,
                "x": sample.orientation.x,
                "y": sample.orientation.y,
                "z": sample.orientation.z,
            },
        },
    }


def decode_button(msg: dict) -> ButtonEvent:
    name = _require(msg, "button")
    try:
        button = Button(name)
    except ValueError:
        raise DecodeError(f"unknown button {name!r}") from None
    stamp = _number(msg, "stamp") if "stamp" in msg else 0.0
    return ButtonEvent(button=button, stamp_ms=stamp)


def encode_button(event: ButtonEvent) -> dict:
    return {"button": event.button.value, "stamp": event.stamp_ms}


def decode_record_control(msg: dict) -> RecordControl:
    action = _require(msg, "action")
    if not isinstance(action, str):
        raise DecodeError("field 'action' must be a string")
    task = msg.get("task", "")
    if not isinstance(task, str):
        raise DecodeError("field 'task' must be a string")
    try:
        return RecordControl(action=action, task=task)
    except ValueError as exc:
        raise DecodeError(str(exc)) from None


def encode_robot_state(state: RobotState) -> dict:
    return {
        "position": {"x": state.ee_position.x, "y": state.ee_position.y, "z": state.ee_position.z},
        "orientation": {
            "w": state.ee_orientation.w,
            "x": state.ee_orientation.x,
            "y": state.ee_orientation.y,
            "z": state.ee_orientation.z,
        },
        "joints": list(state.joints),
        "gripper_closed": state.gripper_closed,
        "stamp_ns": state.stamp_ns,
    }


def encode_planner_status(status: PlannerStatus) -> dict:
    return {
        "clutch_engaged": status.clutch_engaged,
        "gripper_closed": status.gripper_closed,
        "stamp_ns": status.stamp_ns,
    }


def encode_record_status(status: RecordStatus) -> dict:
    return {
        "recording": status.recording,
        "frames": status.frames,
        "episodes": status.episodes,
        "stamp_ns": status.stamp_ns,
    }


def encode_target_pose(target: TargetPose) -> dict:
    return {
        "position": {"x": target.position.x, "y": target.position.y, "z": target.position.z},
        "orientation": {
            "w": target.orientation.w,
            "x": target.orientation.x,
            "y": target.orientation.y,
            "z": target.orientation.z,
        },
        "stamp_ns": target.stamp_ns,
    }
