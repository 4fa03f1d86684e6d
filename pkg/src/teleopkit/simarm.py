"""Simulated 6-DoF arm with first-order command smoothing.

Real cobots lag their targets: trajectory smoothing and mechanical
inertia turn a step command into a gradual approach.  The model here is
a first-order lag with time constant ``lag_time_constant`` plus a hard
Cartesian speed cap and a constant transport delay before a command
takes effect, which together reproduce that end-to-end latency profile
in a fully deterministic way.

Joint values are a documented analytic placeholder (see
`placeholder_joints`); they exist to populate the recorder's observation
vector, not to drive control.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .clock import s_to_ns
from .messages import RobotState, TargetPose
from .posemath import Rpy, Vec3, quat_to_rpy, rpy_to_quat, wrap_angle

DEFAULT_JOINT_LIMITS = tuple((-math.pi, math.pi) for _ in range(6))


@dataclass(frozen=True)
class SimArmConfig:
    lag_time_constant: float = 0.25  # seconds; 0 snaps instantly
    max_cartesian_speed: float = 0.5  # m/s
    transport_delay: float = 0.02  # seconds before a command becomes active
    feedback_rate: float = 100.0  # Hz, feedback publication by the bridge
    joint_limits: tuple[tuple[float, float], ...] = DEFAULT_JOINT_LIMITS
    link_lengths: tuple[float, float] = (0.35, 0.30)  # planar-chain stand-in
    integration_step: float = 0.001  # seconds, internal micro-step
    home_position: tuple[float, float, float] = (0.40, 0.0, 0.30)

    def __post_init__(self):
        if self.lag_time_constant < 0:
            raise ValueError("lag_time_constant must be >= 0")
        if self.max_cartesian_speed <= 0 or self.feedback_rate <= 0:
            raise ValueError("rates must be > 0")
        if self.transport_delay < 0:
            raise ValueError("transport_delay must be >= 0")
        if len(self.joint_limits) != 6:
            raise ValueError("need 6 joint limit pairs")
        if self.integration_step <= 0:
            raise ValueError("integration_step must be > 0")


def placeholder_joints(position: Vec3, rpy: Rpy, config: SimArmConfig) -> tuple[float, ...]:
    """Analytic 6-joint decomposition on a simple documented geometry.

    Positioning chain: joint 0 is the base azimuth ``atan2(y, x)``;
    joints 1-2 come from planar two-link IK with links ``link_lengths``
    acting in the (radial, z) plane, elbow-down, with unreachable points
    clamped to the reachable annulus.  Wrist: joint 3 is roll, joint 4
    is pitch minus the positioning chain's elevation, joint 5 is yaw
    minus the base azimuth.  All joints clamp to ``joint_limits``.
    """
    l1, l2 = config.link_lengths
    q0 = math.atan2(position.y, position.x)
    r = math.hypot(position.x, position.y)
    d = math.hypot(r, position.z)
    d = min(max(d, abs(l1 - l2) + 1e-9), l1 + l2 - 1e-9)
    cos_elbow = (d * d - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
    q2 = math.acos(min(1.0, max(-1.0, cos_elbow)))
    q1 = math.atan2(position.z, r) - math.atan2(l2 * math.sin(q2), l1 + l2 * math.cos(q2))
    q3 = rpy.roll
    q4 = wrap_angle(rpy.pitch - (q1 + q2))
    q5 = wrap_angle(rpy.yaw - q0)
    joints = (q0, q1, q2, q3, q4, q5)
    return tuple(
        min(max(q, lo), hi) for q, (lo, hi) in zip(joints, config.joint_limits)
    )


def _approach(current: float, target_delta: float, factor: float) -> float:
    return current + target_delta * factor


def sim_step(
    state: RobotState,
    latest_command: Optional[TargetPose],
    dt: float,
    config: SimArmConfig,
) -> RobotState:
    """Advance the arm one step toward the active command.

    Position closes the gap by ``1 - exp(-dt/tau)``, capped at
    ``max_cartesian_speed * dt``; orientation applies the same smoothing
    factor to per-component wrapped RPY deltas.  Deterministic given
    (state, command, dt).
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    next_stamp = state.stamp_ns + s_to_ns(dt)
    if latest_command is None:
        return RobotState(
            ee_position=state.ee_position,
            ee_orientation=state.ee_orientation,
            joints=state.joints,
            gripper_closed=state.gripper_closed,
            stamp_ns=next_stamp,
        )

    tau = config.lag_time_constant
    factor = 1.0 if tau == 0.0 else 1.0 - math.exp(-dt / tau)

    gap = latest_command.position - state.ee_position
    dist = math.sqrt(gap.x**2 + gap.y**2 + gap.z**2)
    move = dist * factor
    max_move = config.max_cartesian_speed * dt
    if move > max_move:
        move = max_move
    if dist > 0.0:
        scale = move / dist
        new_pos = Vec3(
            state.ee_position.x + gap.x * scale,
            state.ee_position.y + gap.y * scale,
            state.ee_position.z + gap.z * scale,
        )
    else:
        new_pos = state.ee_position

    cur_rpy = quat_to_rpy(state.ee_orientation)
    cmd_rpy = quat_to_rpy(latest_command.orientation)
    new_rpy = Rpy(
        wrap_angle(_approach(cur_rpy.roll, wrap_angle(cmd_rpy.roll - cur_rpy.roll), factor)),
        wrap_angle(_approach(cur_rpy.pitch, wrap_angle(cmd_rpy.pitch - cur_rpy.pitch), factor)),
        wrap_angle(_approach(cur_rpy.yaw, wrap_angle(cmd_rpy.yaw - cur_rpy.yaw), factor)),
    )

    return RobotState(
        ee_position=new_pos,
        ee_orientation=rpy_to_quat(new_rpy),
        joints=placeholder_joints(new_pos, new_rpy, config),
        gripper_closed=state.gripper_closed,
        stamp_ns=next_stamp,
    )


class SimArm:
    """Stateful wrapper integrating `sim_step` on a timeline.

    Commands queue with their transport-delayed activation time and are
    applied in order as integration crosses each activation instant.
    `advance_to` is idempotent for equal times and integrates in
    ``integration_step`` micro-steps, so identical command streams on
    identical timelines produce bit-identical trajectories.
    """

    def __init__(self, config: SimArmConfig, start_ns: int = 0):
        self.config = config
        hx, hy, hz = config.home_position
        home = Vec3(hx, hy, hz)
        home_rpy = Rpy.zero()
        self._state = RobotState(
            ee_position=home,
            ee_orientation=rpy_to_quat(home_rpy),
            joints=placeholder_joints(home, home_rpy, config),
            gripper_closed=False,
            stamp_ns=start_ns,
        )
        self._now_ns = start_ns
        self._pending: list[tuple[int, TargetPose, int]] = []  # (effective_ns, cmd, seq)
        self._active: Optional[TargetPose] = None
        self._active_seq = -1

    @property
    def now_ns(self) -> int:
        return self._now_ns

    @property
    def active_seq(self) -> int:
        return self._active_seq

    def command(self, target: TargetPose, seq: int, now_ns: int) -> None:
        effective = now_ns + s_to_ns(self.config.transport_delay)
        self._pending.append((effective, target, seq))

    def set_gripper(self, closed: bool, now_ns: int) -> None:
        self._state = RobotState(
            ee_position=self._state.ee_position,
            ee_orientation=self._state.ee_orientation,
            joints=self._state.joints,
            gripper_closed=closed,
            stamp_ns=self._state.stamp_ns,
        )

    def advance_to(self, t_ns: int) -> None:
        if t_ns < self._now_ns:
            raise ValueError(f"sim time cannot go backwards: {t_ns} < {self._now_ns}")
        micro_ns = s_to_ns(self.config.integration_step)
        while self._now_ns < t_ns:
            self._activate_due(self._now_ns)
            dt_ns = min(micro_ns, t_ns - self._now_ns)
            if self._pending:
                next_eff = self._pending[0][0]
                if self._now_ns < next_eff:
                    dt_ns = min(dt_ns, next_eff - self._now_ns)
            self._state = sim_step(self._state, self._active, dt_ns / 1e9, self.config)
            self._now_ns += dt_ns
        self._activate_due(self._now_ns)

    def _activate_due(self, now_ns: int) -> None:
        while self._pending and self._pending[0][0] <= now_ns:
            _, cmd, seq = self._pending.pop(0)
            self._active = cmd
            self._active_seq = seq

    def state(self) -> RobotState:
        return RobotState(
            ee_position=self._state.ee_position,
            ee_orientation=self._state.ee_orientation,
            joints=self._state.joints,
            gripper_closed=self._state.gripper_closed,
            stamp_ns=self._now_ns,
        )
