"""Clutch state machine, zero-jump filter, workspace clamp, re-indexing."""

import math

import numpy as np
import pytest

from helpers import DEFAULT_WORKSPACE, make_state, planner_config, virtual_bus
from teleopkit import topics
from teleopkit.bus import QosProfile
from teleopkit.clock import VirtualClock
from teleopkit.messages import (
    Button,
    ButtonEvent,
    GripperCommand,
    PlannerStatus,
    PoseSample,
    SafetyHold,
    TargetPose,
)
from teleopkit.planner import (
    ClutchMode,
    Planner,
    PlannerNode,
    PlannerWarning,
    WorkspaceBounds,
    clamp_workspace,
    zero_jump_filter,
)
from teleopkit.posemath import Quat, Rpy, Vec3, quat_to_rpy, rpy_to_quat


def phone_pose(x=0.0, y=0.0, z=0.0, rpy=Rpy.zero(), stamp_ms=0.0) -> PoseSample:
    return PoseSample(stamp_ms=stamp_ms, position=Vec3(x, y, z), orientation=rpy_to_quat(rpy))


def released_planner(fb=None, **cfg):
    """Planner that has seen feedback + a zero phone pose and released."""
    clock = VirtualClock()
    planner = Planner(planner_config(**cfg), clock)
    planner.on_feedback(fb or make_state())
    planner.process_pose(phone_pose())
    clock.advance(0.001)
    planner.handle_button(ButtonEvent(Button.VOLUME_UP, 0.0))
    assert planner.clutch.mode is ClutchMode.RELEASED
    return planner, clock


# ---------------------------------------------------------------------------
# pure filter / clamp functions


def test_zero_jump_filter_boundary():
    anchor = Vec3.zero()
    assert zero_jump_filter(anchor, Vec3(0.059, 0, 0), threshold=0.060)
    assert zero_jump_filter(anchor, Vec3(0.060, 0, 0), threshold=0.060)  # <= passes
    assert not zero_jump_filter(anchor, Vec3(0.061, 0, 0), threshold=0.060)
    with pytest.raises(ValueError):
        zero_jump_filter(anchor, anchor, threshold=0.0)


def test_clamp_pulls_outlier_to_face():
    bounds = WorkspaceBounds(x=(0.20, 0.60), y=(-0.40, 0.40), z=(0.05, 0.60))
    out = clamp_workspace(Vec3(0.95, 0.0, 0.30), bounds)
    assert out == Vec3(0.60, 0.0, 0.30)


def test_clamp_is_idempotent():
    rng = np.random.default_rng(83)
    for _ in range(2000):
        p = Vec3(*rng.uniform(-3, 3, size=3))
        once = clamp_workspace(p, DEFAULT_WORKSPACE)
        assert clamp_workspace(once, DEFAULT_WORKSPACE) == once
        assert DEFAULT_WORKSPACE.contains(once)


def test_clamp_interior_points_untouched():
    rng = np.random.default_rng(89)
    for _ in range(500):
        p = Vec3(
            rng.uniform(*DEFAULT_WORKSPACE.x),
            rng.uniform(*DEFAULT_WORKSPACE.y),
            rng.uniform(*DEFAULT_WORKSPACE.z),
        )
        assert clamp_workspace(p, DEFAULT_WORKSPACE) == p


def test_workspace_bounds_validate():
    with pytest.raises(ValueError):
        WorkspaceBounds(x=(0.6, 0.2), y=(-0.4, 0.4), z=(0.05, 0.6))


# ---------------------------------------------------------------------------
# clutch state machine


def test_starts_engaged_and_emits_nothing():
    planner = Planner(planner_config(), VirtualClock())
    assert planner.clutch.mode is ClutchMode.ENGAGED
    assert planner.process_pose(phone_pose(0.1, 0.2, 0.3)) is None


def test_engaged_fuzz_10000_poses_zero_targets():
    rng = np.random.default_rng(97)
    planner = Planner(planner_config(), VirtualClock())
    for _ in range(10_000):
        sample = phone_pose(*rng.uniform(-5, 5, size=3))
        assert planner.process_pose(sample) is None
    assert planner.stats.targets_out == 0
    assert planner.stats.poses_in == 10_000


def test_release_without_feedback_warns_and_stays_engaged():
    planner = Planner(planner_config(), VirtualClock())
    planner.process_pose(phone_pose())
    effects = planner.handle_button(ButtonEvent(Button.VOLUME_UP, 0.0))
    warnings = [e for e in effects if isinstance(e, PlannerWarning)]
    assert len(warnings) == 1 and "feedback" in warnings[0].reason
    assert planner.clutch.mode is ClutchMode.ENGAGED
    statuses = [e for e in effects if isinstance(e, PlannerStatus)]
    assert statuses and statuses[-1].clutch_engaged


def test_release_without_phone_pose_warns():
    planner = Planner(planner_config(), VirtualClock())
    planner.on_feedback(make_state())
    effects = planner.handle_button(ButtonEvent(Button.VOLUME_UP, 0.0))
    warnings = [e for e in effects if isinstance(e, PlannerWarning)]
    assert len(warnings) == 1 and "phone" in warnings[0].reason
    assert planner.clutch.mode is ClutchMode.ENGAGED


def test_release_uses_newest_of_two_feedbacks():
    clock = VirtualClock()
    planner = Planner(planner_config(), clock)
    planner.on_feedback(make_state(x=0.30))
    planner.on_feedback(make_state(x=0.50))
    planner.process_pose(phone_pose())
    planner.handle_button(ButtonEvent(Button.VOLUME_UP, 0.0))
    clock.advance(0.02)
    target = planner.process_pose(phone_pose())  # same phone pose: zero delta
    assert target is not None
    assert target.position.x == pytest.approx(0.50, abs=1e-12)


def test_reindex_continuity_cycles():
    """Engage / move phone / release: first target equals captured feedback."""
    rng = np.random.default_rng(101)
    clock = VirtualClock()
    planner = Planner(planner_config(), clock)
    planner.on_feedback(make_state())
    phone = phone_pose()
    planner.process_pose(phone)
    clock.advance(0.001)
    planner.handle_button(ButtonEvent(Button.VOLUME_UP, 0.0))
    for _ in range(100):
        clock.advance(0.02)
        planner.handle_button(ButtonEvent(Button.VOLUME_UP, 0.0))  # engage
        assert planner.clutch.mode is ClutchMode.ENGAGED
        # operator repositions the phone freely while engaged
        phone = phone_pose(
            *rng.uniform(-2, 2, size=3),
            rpy=Rpy(*(rng.uniform(-math.pi, math.pi, size=3) * [1, 0.45, 1])),
        )
        planner.process_pose(phone)
        fb = make_state(
            x=rng.uniform(*DEFAULT_WORKSPACE.x),
            y=rng.uniform(*DEFAULT_WORKSPACE.y),
            z=rng.uniform(*DEFAULT_WORKSPACE.z),
            rpy=Rpy(*(rng.uniform(-math.pi, math.pi, size=3) * [1, 0.45, 1])),
        )
        planner.on_feedback(fb)
        clock.advance(0.02)
        planner.handle_button(ButtonEvent(Button.VOLUME_UP, 0.0))  # release
        clock.advance(0.02)
        target = planner.process_pose(phone)  # unchanged phone: zero delta
        assert target is not None
        assert target.position.distance_to(fb.ee_position) < 1e-9
        assert target.orientation.approx_equal(fb.ee_orientation, tol=1e-9)


# ---------------------------------------------------------------------------
# zero-jump filter through the planner


def test_planner_accepts_59mm_step():
    planner, clock = released_planner()
    clock.advance(0.02)
    target = planner.process_pose(phone_pose(0.059, 0, 0))
    assert target is not None
    assert target.position.x == pytest.approx(0.459, abs=1e-12)


def test_planner_drops_61mm_step_then_recovers():
    planner, clock = released_planner()
    clock.advance(0.02)
    assert planner.process_pose(phone_pose(0.061, 0, 0)) is None
    assert planner.stats.dropped_jumps == 1
    clock.advance(0.02)
    # next in-range candidate passes with no reset
    target = planner.process_pose(phone_pose(0.059, 0, 0))
    assert target is not None
    assert target.position.x == pytest.approx(0.459, abs=1e-12)


def test_jump_measured_from_last_accepted_not_last_seen():
    planner, clock = released_planner()
    clock.advance(0.02)
    for _ in range(5):  # repeated glitch frames all drop against the same anchor
        assert planner.process_pose(phone_pose(0.2, 0.2, 0.2)) is None
        clock.advance(0.02)
    assert planner.stats.dropped_jumps == 5
    target = planner.process_pose(phone_pose(0.03, 0.0, 0.0))
    assert target is not None


def test_rotation_step_filter_drops_then_recovers():
    planner, clock = released_planner()
    clock.advance(0.02)
    assert planner.process_pose(phone_pose(rpy=Rpy(0, 0, 0.40))) is None
    assert planner.stats.dropped_rotation_steps == 1
    clock.advance(0.02)
    target = planner.process_pose(phone_pose(rpy=Rpy(0, 0, 0.30)))
    assert target is not None
    assert quat_to_rpy(target.orientation).yaw == pytest.approx(0.30, abs=1e-9)


# ---------------------------------------------------------------------------
# mapping and rotation composition


def test_translation_uses_axis_map_and_scale():
    from teleopkit.posemath import AxisMap

    planner, clock = released_planner(
        axis_map=AxisMap.from_spec("x=-z,y=x,z=y", scale=0.5), jump_threshold=1.0
    )
    clock.advance(0.02)
    target = planner.process_pose(phone_pose(0.0, 0.0, -0.08))
    # phone -z maps to robot +x, scaled by 0.5: 0.40 + 0.04
    assert target.position.x == pytest.approx(0.44, abs=1e-12)
    assert target.position.y == pytest.approx(0.0, abs=1e-12)
    assert target.position.z == pytest.approx(0.30, abs=1e-12)


def test_rotation_composes_delta_onto_feedback_orientation():
    planner, clock = released_planner(fb=make_state(rpy=Rpy(0, 0, 0.5)))
    clock.advance(0.02)
    target = planner.process_pose(phone_pose(rpy=Rpy(0, 0, 0.2)))
    assert quat_to_rpy(target.orientation).yaw == pytest.approx(0.7, abs=1e-9)


def test_rotation_disabled_holds_feedback_orientation():
    planner, clock = released_planner(
        fb=make_state(rpy=Rpy(0, 0, 0.5)), rotation_enabled=False
    )
    clock.advance(0.02)
    target = planner.process_pose(phone_pose(rpy=Rpy(0, 0, 0.3)))
    assert quat_to_rpy(target.orientation).yaw == pytest.approx(0.5, abs=1e-9)


def test_rotation_wraps_across_seam():
    planner, clock = released_planner(fb=make_state(rpy=Rpy(0, 0, 3.0)))
    clock.advance(0.02)
    target = planner.process_pose(phone_pose(rpy=Rpy(0, 0, 0.3)))
    # 3.0 + 0.3 wraps to -2.98318...
    assert quat_to_rpy(target.orientation).yaw == pytest.approx(
        3.3 - 2 * math.pi, abs=1e-9
    )


# ---------------------------------------------------------------------------
# workspace enforcement


def test_clamped_target_emitted_on_boundary():
    planner, clock = released_planner(
        workspace=WorkspaceBounds(x=(0.20, 0.60), y=(-0.40, 0.40), z=(0.05, 0.60)),
        jump_threshold=10.0,
    )
    clock.advance(0.02)
    target = planner.process_pose(phone_pose(0.55, 0.0, 0.0))  # candidate x = 0.95
    assert target.position.x == 0.60
    assert planner.stats.targets_out == 1


def test_emitted_targets_always_inside_workspace():
    rng = np.random.default_rng(103)
    planner, clock = released_planner(jump_threshold=10.0)
    for _ in range(5000):
        clock.advance(0.02)
        target = planner.process_pose(phone_pose(*rng.uniform(-4, 4, size=3)))
        if target is not None:
            assert DEFAULT_WORKSPACE.contains(target.position)


# ---------------------------------------------------------------------------
# gripper debounce


def test_gripper_toggle_and_debounce():
    clock = VirtualClock()
    planner = Planner(planner_config(), clock)
    effects = planner.handle_button(ButtonEvent(Button.VOLUME_DOWN, 0.0))
    grips = [e for e in effects if isinstance(e, GripperCommand)]
    assert len(grips) == 1 and grips[0].closed
    clock.advance(0.100)  # inside the 150 ms window
    assert planner.handle_button(ButtonEvent(Button.VOLUME_DOWN, 0.0)) == []
    assert planner.stats.debounced_gripper == 1
    assert planner.gripper_closed
    clock.advance(0.060)  # 160 ms since the accepted toggle
    effects = planner.handle_button(ButtonEvent(Button.VOLUME_DOWN, 0.0))
    grips = [e for e in effects if isinstance(e, GripperCommand)]
    assert len(grips) == 1 and not grips[0].closed


def test_gripper_debounce_fuzz_never_two_within_window():
    rng = np.random.default_rng(107)
    clock = VirtualClock()
    planner = Planner(planner_config(gripper_debounce_ms=150.0), clock)
    accepted_ns = []
    for _ in range(2000):
        clock.advance(float(rng.uniform(0.001, 0.12)))
        effects = planner.handle_button(ButtonEvent(Button.VOLUME_DOWN, 0.0))
        if any(isinstance(e, GripperCommand) for e in effects):
            accepted_ns.append(clock.now_ns())
    gaps = np.diff(accepted_ns)
    assert (gaps >= 150e6).all()
    assert len(accepted_ns) > 0


# ---------------------------------------------------------------------------
# stamps and safety hold


def test_target_stamps_strictly_increasing_even_in_bursts():
    planner, clock = released_planner()
    stamps = []
    for i in range(300):
        if i % 3 == 0:
            clock.advance(0.02)  # two of every three poses share a clock instant
        target = planner.process_pose(phone_pose(0.001 * (i % 5), 0, 0))
        if target is not None:
            stamps.append(target.stamp_ns)
    assert len(stamps) > 200
    assert all(b > a for a, b in zip(stamps, stamps[1:]))


def test_force_engage_only_acts_when_released():
    planner, clock = released_planner()
    effects = planner.force_engage("client disconnected")
    assert any(isinstance(e, PlannerWarning) for e in effects)
    assert planner.clutch.mode is ClutchMode.ENGAGED
    assert planner.force_engage("again") == []  # already engaged: no-op


# ---------------------------------------------------------------------------
# bus bindings


def node_fixture():
    bus, clock = virtual_bus()
    node = PlannerNode(bus, "", planner_config(), clock)
    return bus, clock, node


def publish_release_sequence(bus, clock):
    bus.publish(topics.ROBOT_FEEDBACK, make_state())
    clock.advance(0.001)
    bus.publish(topics.PHONE_POSE, phone_pose())
    clock.advance(0.001)
    bus.publish(topics.BUTTON, ButtonEvent(Button.VOLUME_UP, 0.0))


def test_node_publishes_initial_status():
    bus, clock, node = node_fixture()
    env = bus.latest(topics.PLANNER_STATE)
    assert env is not None and env.payload.clutch_engaged


def test_node_release_then_targets_on_bus():
    bus, clock, node = node_fixture()
    target_sub = bus.subscribe(topics.TARGET_POSE, QosProfile(depth=64))
    publish_release_sequence(bus, clock)
    node.step()
    assert node.planner.clutch.mode is ClutchMode.RELEASED
    for i in range(5):
        clock.advance(0.02)
        bus.publish(topics.PHONE_POSE, phone_pose(0.002 * i, 0, 0))
        node.step()
    targets = target_sub.drain()
    assert len(targets) == 5
    stamps = [t.payload.stamp_ns for t in targets]
    assert all(b > a for a, b in zip(stamps, stamps[1:]))


def test_node_same_instant_button_processed_before_pose():
    """Tie order is deliberate: a button at the same instant precedes the pose."""
    bus, clock, node = node_fixture()
    bus.publish(topics.ROBOT_FEEDBACK, make_state())
    clock.advance(0.001)
    # pose and button land at one frozen instant; button wins the tie, so
    # this release is refused (no phone pose seen yet)
    bus.publish(topics.PHONE_POSE, phone_pose())
    bus.publish(topics.BUTTON, ButtonEvent(Button.VOLUME_UP, 0.0))
    node.step()
    assert node.planner.clutch.mode is ClutchMode.ENGAGED
    clock.advance(0.001)
    bus.publish(topics.BUTTON, ButtonEvent(Button.VOLUME_UP, 0.0))
    node.step()
    assert node.planner.clutch.mode is ClutchMode.RELEASED


def test_node_same_instant_feedback_before_release():
    bus, clock, node = node_fixture()
    bus.publish(topics.ROBOT_FEEDBACK, make_state(x=0.30))
    clock.advance(0.001)
    bus.publish(topics.PHONE_POSE, phone_pose())
    node.step()
    clock.advance(0.001)
    # fresher feedback arrives in the same instant as the release toggle
    bus.publish(topics.BUTTON, ButtonEvent(Button.VOLUME_UP, 0.0))
    bus.publish(topics.ROBOT_FEEDBACK, make_state(x=0.52))
    node.step()
    assert node.planner.clutch.robot_origin.position.x == pytest.approx(0.52)


def test_node_safety_hold_reengages():
    bus, clock, node = node_fixture()
    state_sub = bus.subscribe(topics.PLANNER_STATE, QosProfile(depth=16))
    publish_release_sequence(bus, clock)
    node.step()
    assert node.planner.clutch.mode is ClutchMode.RELEASED
    state_sub.drain()
    clock.advance(0.01)
    bus.publish(topics.SAFETY_HOLD, SafetyHold(reason="client gone", stamp_ns=0))
    node.step()
    assert node.planner.clutch.mode is ClutchMode.ENGAGED
    statuses = state_sub.drain()
    assert statuses and statuses[-1].payload.clutch_engaged
    clock.advance(0.02)
    bus.publish(topics.PHONE_POSE, phone_pose(0.01, 0, 0))
    node.step()
    assert bus.latest(topics.TARGET_POSE) is None


def test_node_namespaced_topics():
    bus, clock = virtual_bus()
    node = PlannerNode(bus, "/left", planner_config(), clock)
    env = bus.latest("/left/teleop/planner_state")
    assert env is not None
    bus.publish("/left/teleop/robot_feedback", make_state())
    clock.advance(0.001)
    bus.publish("/left/teleop/phone_pose", phone_pose())
    clock.advance(0.001)
    bus.publish("/left/teleop/button", ButtonEvent(Button.VOLUME_UP, 0.0))
    node.step()
    assert node.planner.clutch.mode is ClutchMode.RELEASED


def test_huge_finite_pose_dropped_not_crashed():
    # 1e300 passes every isfinite check; the jump filter has to treat it
    # as an absurd distance and drop it instead of overflowing
    planner, _ = released_planner()
    target = planner.process_pose(phone_pose(x=1e300, y=-1e300, z=1e300, stamp_ms=1.0))
    assert target is None
    assert planner.stats.dropped_jumps == 1
    follow_up = planner.process_pose(phone_pose(x=0.001, stamp_ms=2.0))
    assert follow_up is not None
