"""Agnostic planning core: phone stream in, safe robot targets out.

The planner owns the clutch state machine and the two-stage safety
filter.  It knows nothing about the robot downstream; it consumes pose,
button and feedback envelopes and emits absolute Cartesian targets plus
gripper commands, all within a configured workspace volume.

Clutch semantics: the planner starts ENGAGED (output suspended) and only
tracks after an operator deliberately releases.  A release jointly
records the current phone pose and the latest robot feedback pose as the
new reference origins, so motion resumes from wherever the robot
actually is — that re-indexing is what gives the operator an unbounded
virtual workspace from a desk-sized physical one.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from . import topics
from .bus import KEEP_LAST_ONE, MessageBus, QosProfile, Subscription
from .clock import Clock
from .messages import (
    Button,
    ButtonEvent,
    GripperCommand,
    PlannerStatus,
    PoseSample,
    RobotState,
    SafetyHold,
    TargetPose,
)
from .posemath import (
    AxisMap,
    Quat,
    Rpy,
    Vec3,
    compose_rpy,
    map_phone_delta,
    quat_to_rpy,
    rotation_delta,
    rpy_to_quat,
    wrap_angle,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class WorkspaceBounds:
    """Axis-aligned safe volume in the robot base frame, meters."""

    x: tuple[float, float]
    y: tuple[float, float]
    z: tuple[float, float]

    def __post_init__(self):
        for axis, (lo, hi) in zip("xyz", (self.x, self.y, self.z)):
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"workspace {axis} interval invalid: [{lo}, {hi}]")

    def contains(self, p: Vec3, tol: float = 0.0) -> bool:
        return (
            self.x[0] - tol <= p.x <= self.x[1] + tol
            and self.y[0] - tol <= p.y <= self.y[1] + tol
            and self.z[0] - tol <= p.z <= self.z[1] + tol
        )


def clamp_workspace(p: Vec3, bounds: WorkspaceBounds) -> Vec3:
    """Componentwise clamp into the safe volume. Idempotent."""
    return Vec3(
        min(max(p.x, bounds.x[0]), bounds.x[1]),
        min(max(p.y, bounds.y[0]), bounds.y[1]),
        min(max(p.z, bounds.z[0]), bounds.z[1]),
    )


def zero_jump_filter(prev_accepted: Vec3, candidate: Vec3, threshold: float) -> bool:
    """True to accept, False to drop.

    Drops any candidate whose Euclidean distance from the last accepted
    target exceeds the threshold — tracking loss, a dropped device or a
    network glitch shows up as exactly such a discontinuity.  Recovery is
    automatic: the next in-range candidate passes with no reset.
    """
    if threshold <= 0:
        raise ValueError(f"jump threshold must be > 0, got {threshold}")
    return prev_accepted.distance_to(candidate) <= threshold


@dataclass(frozen=True)
class PlannerConfig:
    axis_map: AxisMap
    workspace: WorkspaceBounds
    jump_threshold: float = 0.060  # meters between consecutive accepted targets
    rotation_enabled: bool = True
    gripper_debounce_ms: float = 150.0
    # Rotation glitches are bounded separately: max per-component wrapped
    # step between consecutive accepted targets.
    max_rotation_step: float = 0.35

    def __post_init__(self):
        if self.jump_threshold <= 0:
            raise ValueError("jump_threshold must be > 0")
        if self.max_rotation_step <= 0:
            raise ValueError("max_rotation_step must be > 0")
        if self.gripper_debounce_ms < 0:
            raise ValueError("gripper_debounce_ms must be >= 0")


class ClutchMode(Enum):
    ENGAGED = "engaged"  # output suspended, operator free to move the phone
    RELEASED = "released"  # tracking


@dataclass(frozen=True)
class Origin:
    position: Vec3
    rpy: Rpy


@dataclass
class ClutchState:
    mode: ClutchMode = ClutchMode.ENGAGED
    phone_origin: Optional[Origin] = None
    robot_origin: Optional[Origin] = None


@dataclass(frozen=True)
class PlannerWarning:
    reason: str


Effect = Union[GripperCommand, PlannerStatus, PlannerWarning]


@dataclass
class PlannerStats:
    poses_in: int = 0
    targets_out: int = 0
    dropped_jumps: int = 0
    dropped_rotation_steps: int = 0
    dropped_nonfinite: int = 0
    debounced_gripper: int = 0
    warnings: int = 0


class Planner:
    """Single-arm planning state machine.

    One instance per namespace; instances share nothing.  The methods are
    meant to be fed a merged, timestamp-ordered stream of envelopes (see
    `PlannerNode`), but are equally usable standalone in tests.
    """

    def __init__(self, config: PlannerConfig, clock: Clock):
        self.config = config
        self.clock = clock
        self.clutch = ClutchState()
        self.gripper_closed = False
        self.stats = PlannerStats()
        self._latest_feedback: Optional[RobotState] = None
        self._latest_phone: Optional[PoseSample] = None
        self._last_accepted_pos: Optional[Vec3] = None
        self._last_accepted_rpy: Optional[Rpy] = None
        self._last_gripper_toggle_ns: Optional[int] = None
        self._last_target_stamp_ns: Optional[int] = None

    # ------------------------------------------------------------------
    # inputs

    def on_feedback(self, state: RobotState) -> None:
        """Cache the newest robot pose for the next clutch release."""
        self._latest_feedback = state

    def handle_button(self, event: ButtonEvent) -> list[Effect]:
        if event.button is Button.VOLUME_UP:
            return self._toggle_clutch()
        return self._toggle_gripper()

    def process_pose(self, sample: PoseSample) -> Optional[TargetPose]:
        """Run one phone pose through mapping, filtering and clamping.

        Returns the target to publish, or None while the clutch is
        engaged or when the sample is filtered out.
        """
        self.stats.poses_in += 1
        if not self._sample_finite(sample):
            self.stats.dropped_nonfinite += 1
            return None
        self._latest_phone = sample
        if self.clutch.mode is ClutchMode.ENGAGED:
            return None

        phone_origin = self.clutch.phone_origin
        robot_origin = self.clutch.robot_origin
        assert phone_origin is not None and robot_origin is not None

        dp = sample.position - phone_origin.position
        candidate_pos = map_phone_delta(dp, self.config.axis_map, robot_origin.position)
        if self.config.rotation_enabled:
            delta = rotation_delta(phone_origin.rpy, quat_to_rpy(sample.orientation))
            candidate_rpy = compose_rpy(robot_origin.rpy, delta)
        else:
            candidate_rpy = robot_origin.rpy

        assert self._last_accepted_pos is not None and self._last_accepted_rpy is not None
        if not zero_jump_filter(self._last_accepted_pos, candidate_pos, self.config.jump_threshold):
            self.stats.dropped_jumps += 1
            return None
        if self._rotation_step_too_large(self._last_accepted_rpy, candidate_rpy):
            self.stats.dropped_rotation_steps += 1
            return None

        clamped = clamp_workspace(candidate_pos, self.config.workspace)
        # Stamps stay strictly increasing even if several poses land in
        # one planner step (burst drain at a frozen clock instant).
        stamp = self.clock.now_ns()
        if self._last_target_stamp_ns is not None and stamp <= self._last_target_stamp_ns:
            stamp = self._last_target_stamp_ns + 1
        self._last_target_stamp_ns = stamp
        target = TargetPose(
            position=clamped,
            orientation=rpy_to_quat(candidate_rpy),
            stamp_ns=stamp,
        )
        self._last_accepted_pos = clamped
        self._last_accepted_rpy = candidate_rpy.wrapped()
        self.stats.targets_out += 1
        return target

    def force_engage(self, reason: str) -> list[Effect]:
        """Safety hold: suspend output (e.g. after a client reconnect)."""
        effects: list[Effect] = []
        if self.clutch.mode is ClutchMode.RELEASED:
            self.clutch.mode = ClutchMode.ENGAGED
            effects.append(PlannerWarning(f"clutch engaged: {reason}"))
            self.stats.warnings += 1
            effects.append(self.status())
        return effects

    # ------------------------------------------------------------------
    # state

    def status(self) -> PlannerStatus:
        return PlannerStatus(
            clutch_engaged=self.clutch.mode is ClutchMode.ENGAGED,
            gripper_closed=self.gripper_closed,
            stamp_ns=self.clock.now_ns(),
        )

    # ------------------------------------------------------------------
    # internals

    def _toggle_clutch(self) -> list[Effect]:
        effects: list[Effect] = []
        if self.clutch.mode is ClutchMode.RELEASED:
            # Engage: suspend output; origins stay until the next release.
            self.clutch.mode = ClutchMode.ENGAGED
        else:
            # Release: re-index on the current phone pose + newest feedback.
            if self._latest_feedback is None:
                self.stats.warnings += 1
                effects.append(PlannerWarning("release refused: no robot feedback yet"))
                effects.append(self.status())
                return effects
            if self._latest_phone is None:
                self.stats.warnings += 1
                effects.append(PlannerWarning("release refused: no phone pose yet"))
                effects.append(self.status())
                return effects
            fb = self._latest_feedback
            phone = self._latest_phone
            self.clutch.phone_origin = Origin(
                position=phone.position, rpy=quat_to_rpy(phone.orientation)
            )
            self.clutch.robot_origin = Origin(
                position=fb.ee_position, rpy=quat_to_rpy(fb.ee_orientation)
            )
            # The release re-anchors the jump filter as well, so the first
            # post-release target is never rejected against a stale anchor.
            self._last_accepted_pos = fb.ee_position
            self._last_accepted_rpy = quat_to_rpy(fb.ee_orientation).wrapped()
            self.clutch.mode = ClutchMode.RELEASED
        effects.append(self.status())
        return effects

    def _toggle_gripper(self) -> list[Effect]:
        now = self.clock.now_ns()
        debounce_ns = int(self.config.gripper_debounce_ms * 1e6)
        if (
            self._last_gripper_toggle_ns is not None
            and now - self._last_gripper_toggle_ns < debounce_ns
        ):
            self.stats.debounced_gripper += 1
            return []
        self._last_gripper_toggle_ns = now
        self.gripper_closed = not self.gripper_closed
        return [GripperCommand(closed=self.gripper_closed, stamp_ns=now), self.status()]

    def _rotation_step_too_large(self, prev: Rpy, candidate: Rpy) -> bool:
        step = self.config.max_rotation_step
        return (
            abs(wrap_angle(candidate.roll - prev.roll)) > step
            or abs(wrap_angle(candidate.pitch - prev.pitch)) > step
            or abs(wrap_angle(candidate.yaw - prev.yaw)) > step
        )

    @staticmethod
    def _sample_finite(sample: PoseSample) -> bool:
        p, q = sample.position, sample.orientation
        return all(
            math.isfinite(v) for v in (p.x, p.y, p.z, q.w, q.x, q.y, q.z)
        )


# Envelope processing order for same-timestamp ties: feedback first so a
# release sees the newest robot pose, buttons before poses so a release
# takes effect before the pose that follows it.
_TIE_PRIORITY = {RobotState: 0, SafetyHold: 1, ButtonEvent: 2, PoseSample: 3}


class PlannerNode:
    """Bus bindings for one `Planner` instance under one namespace."""

    def __init__(self, bus: MessageBus, namespace: str, config: PlannerConfig, clock: Clock):
        self.bus = bus
        self.namespace = namespace
        self.planner = Planner(config, clock)
        ns = lambda base: topics.namespaced(namespace, base)
        self._target_topic = ns(topics.TARGET_POSE)
        self._gripper_topic = ns(topics.GRIPPER_CMD)
        self._state_topic = ns(topics.PLANNER_STATE)
        bus.advertise(self._target_topic, TargetPose)
        bus.advertise(self._gripper_topic, GripperCommand)
        bus.advertise(self._state_topic, PlannerStatus)
        self._sub_pose: Subscription = bus.subscribe(
            ns(topics.PHONE_POSE), QosProfile(depth=64)
        )
        self._sub_button: Subscription = bus.subscribe(
            ns(topics.BUTTON), QosProfile(depth=32)
        )
        self._sub_feedback: Subscription = bus.subscribe(ns(topics.ROBOT_FEEDBACK), KEEP_LAST_ONE)
        self._sub_hold: Subscription = bus.subscribe(ns(topics.SAFETY_HOLD), QosProfile(depth=8))
        self.bus.publish(self._state_topic, self.planner.status())

    def step(self) -> int:
        """Drain pending inputs in timestamp order; returns envelopes seen."""
        pending = (
            self._sub_feedback.drain()
            + self._sub_hold.drain()
            + self._sub_button.drain()
            + self._sub_pose.drain()
        )
        pending.sort(
            key=lambda e: (e.publish_time_ns, _TIE_PRIORITY[type(e.payload)], e.sequence)
        )
        for env in pending:
            payload = env.payload
            if isinstance(payload, RobotState):
                self.planner.on_feedback(payload)
            elif isinstance(payload, SafetyHold):
                self._emit(self.planner.force_engage(payload.reason))
            elif isinstance(payload, ButtonEvent):
                self._emit(self.planner.handle_button(payload))
            elif isinstance(payload, PoseSample):
                target = self.planner.process_pose(payload)
                if target is not None:
                    self.bus.publish(self._target_topic, target)
        return len(pending)

    def _emit(self, effects: list[Effect]) -> None:
        for effect in effects:
            if isinstance(effect, GripperCommand):
                self.bus.publish(self._gripper_topic, effect)
            elif isinstance(effect, PlannerStatus):
                self.bus.publish(self._state_topic, effect)
            else:
                log.warning("[planner%s] %s", self.namespace, effect.reason)
