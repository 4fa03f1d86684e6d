"""Shared test helpers and independent geometry oracles.

The oracles here deliberately avoid the library's own conversion code:
wrapping is done by repeated 2*pi shifts, rotations go through explicit
3x3 matrices, so library bugs cannot hide behind themselves.
"""

from __future__ import annotations

import math

import numpy as np

from teleopkit.bus import MessageBus
from teleopkit.clock import VirtualClock
from teleopkit.messages import RobotState, TargetPose
from teleopkit.planner import PlannerConfig, WorkspaceBounds
from teleopkit.posemath import AxisMap, Quat, Rpy, Vec3, rpy_to_quat


def wrap_oracle(angle: float) -> float:
    """Reference wrap: shift by 2*pi until the result lands in [-pi, pi)."""
    while angle >= math.pi:
        angle -= 2.0 * math.pi
    while angle < -math.pi:
        angle += 2.0 * math.pi
    return angle


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=np.float64)


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]], dtype=np.float64)


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=np.float64)


def rpy_matrix_oracle(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Extrinsic X-Y-Z rotation matrix: Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


def quat_matrix_oracle(q: Quat) -> np.ndarray:
    """Standard unit-quaternion to rotation-matrix formula."""
    w, x, y, z = q.w, q.x, q.y, q.z
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ],
        dtype=np.float64,
    )


def random_quat(rng: np.random.Generator) -> Quat:
    w, x, y, z = rng.normal(size=4)
    return Quat(w, x, y, z)


def make_state(
    x: float = 0.40,
    y: float = 0.0,
    z: float = 0.30,
    rpy: Rpy = Rpy.zero(),
    gripper_closed: bool = False,
    stamp_ns: int = 0,
) -> RobotState:
    return RobotState(
        ee_position=Vec3(x, y, z),
        ee_orientation=rpy_to_quat(rpy),
        joints=(0.0, 0.1, 0.2, 0.3, 0.4, 0.5),
        gripper_closed=gripper_closed,
        stamp_ns=stamp_ns,
    )


def make_target(
    x: float = 0.40,
    y: float = 0.0,
    z: float = 0.30,
    rpy: Rpy = Rpy.zero(),
    stamp_ns: int = 0,
) -> TargetPose:
    return TargetPose(position=Vec3(x, y, z), orientation=rpy_to_quat(rpy), stamp_ns=stamp_ns)


DEFAULT_WORKSPACE = WorkspaceBounds(x=(0.15, 0.65), y=(-0.40, 0.40), z=(0.05, 0.60))


def planner_config(**overrides) -> PlannerConfig:
    kwargs = dict(
        axis_map=AxisMap.identity(),
        workspace=DEFAULT_WORKSPACE,
        jump_threshold=0.060,
        rotation_enabled=True,
        gripper_debounce_ms=150.0,
        max_rotation_step=0.35,
    )
    kwargs.update(overrides)
    return PlannerConfig(**kwargs)


def virtual_bus(start_ns: int = 0) -> tuple[MessageBus, VirtualClock]:
    clock = VirtualClock(start_ns)
    return MessageBus(clock), clock
