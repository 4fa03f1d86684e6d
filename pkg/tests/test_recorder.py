"""Recorder gate, vector layouts, and the 20 Hz episode loop."""

import math
import random

import numpy as np
import pytest

from helpers import make_state, make_target, virtual_bus
from teleopkit import topics
from teleopkit.bus import Envelope, QosProfile
from teleopkit.clock import s_to_ns
from teleopkit.messages import (
    CameraFrame,
    GripperCommand,
    RecordControl,
    RobotState,
)
from teleopkit.posemath import Rpy, rpy_to_quat
from teleopkit.recorder import (
    ACTION_DIM,
    OBSERVATION_DIM,
    RECORD_HZ,
    EpisodeRecorder,
    MemoryCeilingExceeded,
    RecorderConfig,
    build_action,
    build_observation,
    sync_gate,
)

CAM_TOPIC = topics.camera("cam_test")


def env_at(t_ns):
    return Envelope(topic="t", publish_time_ns=t_ns, sequence=0, payload=None)


def recorder_fixture(**config_overrides):
    bus, clock = virtual_bus()
    config = RecorderConfig(**config_overrides) if config_overrides else RecorderConfig()
    rec = EpisodeRecorder(bus, clock, [CAM_TOPIC], config=config)
    return bus, clock, rec


def feed(bus, clock, state=None):
    """Publish one fresh camera frame and one fresh feedback sample."""
    state = state or make_state(stamp_ns=clock.now_ns())
    pixels = np.zeros((4, 4, 3), dtype=np.uint8)
    bus.publish(CAM_TOPIC, CameraFrame(source="cam_test", pixels=pixels, stamp_ns=clock.now_ns()))
    bus.publish(topics.ROBOT_FEEDBACK, state)


# ---- sync gate -----------------------------------------------------------

def test_gate_passes_when_all_sources_fresh():
    now = s_to_ns(1.0)
    latest = {"a": env_at(now - s_to_ns(0.010)), "b": env_at(now - s_to_ns(0.010))}
    assert sync_gate(latest, now, 0.050) is True


def test_gate_fails_on_one_stale_source():
    now = s_to_ns(1.0)
    latest = {"a": env_at(now - s_to_ns(0.010)), "b": env_at(now - s_to_ns(0.120))}
    assert sync_gate(latest, now, 0.050) is False


def test_gate_fails_on_never_published_source():
    assert sync_gate({"a": env_at(0), "b": None}, 0, 0.050) is False


def test_gate_empty_sources_raise():
    with pytest.raises(ValueError):
        sync_gate({}, 0, 0.050)


def test_gate_window_boundary():
    now = s_to_ns(1.0)
    exactly = {"a": env_at(now - s_to_ns(0.050))}
    just_past = {"a": env_at(now - s_to_ns(0.050) - 1)}
    assert sync_gate(exactly, now, 0.050) is True
    assert sync_gate(just_past, now, 0.050) is False


# ---- vector layouts --------------------------------------------------------

def test_observation_layout_and_width():
    state = make_state(x=0.41, y=-0.12, z=0.33, rpy=Rpy(0.1, -0.2, 0.3), gripper_closed=True)
    obs = build_observation(state)
    assert obs.shape == (OBSERVATION_DIM,)
    assert obs.dtype == np.float32
    assert np.allclose(obs[:6], (0.0, 0.1, 0.2, 0.3, 0.4, 0.5), atol=1e-6)
    assert np.allclose(obs[6:9], (0.41, -0.12, 0.33), atol=1e-6)
    assert np.allclose(obs[9:12], (0.1, -0.2, 0.3), atol=1e-6)
    assert obs[12] == 1.0


def test_observation_orientation_stays_wrapped():
    state = make_state(rpy=Rpy(0.0, 0.0, math.pi - 1e-4))
    obs = build_observation(state)
    assert -math.pi <= obs[11] < math.pi


def test_action_zero_for_identical_targets():
    t = make_target()
    action = build_action(t, t, gripper_closed=False)
    assert action.shape == (ACTION_DIM,)
    assert action.dtype == np.float32
    assert np.allclose(action[:6], 0.0)
    assert action[6] == 0.0


def test_action_position_delta_and_gripper_flag():
    a = make_target(x=0.40, y=0.00, z=0.30)
    b = make_target(x=0.43, y=-0.02, z=0.31)
    action = build_action(a, b, gripper_closed=True)
    assert np.allclose(action[:3], (0.03, -0.02, 0.01), atol=1e-6)
    assert action[6] == 1.0


def test_action_yaw_seam_gives_small_delta():
    # +179 deg to -179 deg is a 2 deg move, never a 358 deg one
    prev = make_target(rpy=Rpy(0.0, 0.0, 3.12414))
    cur = make_target(rpy=Rpy(0.0, 0.0, -3.12414))
    action = build_action(prev, cur, gripper_closed=False)
    assert action[5] == pytest.approx(0.03491, abs=1e-4)
    assert abs(action[5]) < 0.1


def test_action_rotation_components_always_wrapped():
    rng = random.Random(181)
    for _ in range(500):
        prev = make_target(rpy=Rpy(0.0, 0.0, rng.uniform(-math.pi, math.pi - 1e-9)))
        cur = make_target(rpy=Rpy(0.0, 0.0, rng.uniform(-math.pi, math.pi - 1e-9)))
        action = build_action(prev, cur, gripper_closed=False)
        assert -math.pi <= action[5] < math.pi


# ---- episode loop ----------------------------------------------------------

def test_requires_at_least_one_camera():
    bus, clock = virtual_bus()
    with pytest.raises(ValueError):
        EpisodeRecorder(bus, clock, [])


def test_five_seconds_at_20hz_yields_100_frames():
    bus, clock, rec = recorder_fixture()
    rec.start("demo")
    for _ in range(100):
        feed(bus, clock)
        rec.tick(clock.now_ns())
        clock.advance(1.0 / RECORD_HZ)
    episode = rec.stop()
    assert len(episode.frames) == 100
    assert episode.skipped_ticks == 0
    assert [f.frame_index for f in episode.frames] == list(range(100))
    stamps = [f.timestamp_s for f in episode.frames]
    assert stamps[0] == pytest.approx(0.0)
    assert stamps[-1] == pytest.approx(99 / RECORD_HZ, abs=1e-9)


def test_stale_camera_skips_ticks_but_keeps_indices_consecutive():
    bus, clock, rec = recorder_fixture()
    rec.start()
    for i in range(60):
        if not 20 <= i < 40:  # freeze the camera for one second
            feed(bus, clock)
        else:
            bus.publish(topics.ROBOT_FEEDBACK, make_state(stamp_ns=clock.now_ns()))
        rec.tick(clock.now_ns())
        clock.advance(1.0 / RECORD_HZ)
    episode = rec.stop()
    assert 18 <= episode.skipped_ticks <= 20
    assert len(episode.frames) == 60 - episode.skipped_ticks
    assert [f.frame_index for f in episode.frames] == list(range(len(episode.frames)))


def test_record_control_via_bus():
    bus, clock, rec = recorder_fixture()
    bus.publish(topics.RECORD_CTL, RecordControl(action="start", task="bus task"))
    feed(bus, clock)
    rec.tick(clock.now_ns())
    assert rec.recording
    assert rec.episode.task == "bus task"
    clock.advance(0.05)
    bus.publish(topics.RECORD_CTL, RecordControl(action="stop"))
    rec.tick(clock.now_ns())
    assert not rec.recording
    assert len(rec.completed) == 1


def test_discard_drops_episode_without_completing():
    bus, clock, rec = recorder_fixture()
    rec.start()
    feed(bus, clock)
    rec.tick(clock.now_ns())
    bus.publish(topics.RECORD_CTL, RecordControl(action="discard"))
    rec.tick(clock.now_ns())
    assert not rec.recording
    assert rec.completed == []
    assert rec.episodes_finished == 0


def test_start_twice_and_stop_idle_are_safe():
    bus, clock, rec = recorder_fixture()
    rec.start("first")
    rec.start("second")
    assert rec.episode.task == "first"
    rec.discard()
    assert rec.stop() is None


def test_default_task_applied_when_blank():
    bus, clock, rec = recorder_fixture()
    rec.start("")
    assert rec.episode.task == RecorderConfig().default_task


def test_memory_ceiling_aborts_episode():
    bus, clock, rec = recorder_fixture(memory_ceiling_bytes=200)
    status_sub = bus.subscribe(topics.RECORD_STATUS, QosProfile(depth=64))
    rec.start()
    feed(bus, clock)
    rec.tick(clock.now_ns())  # first frame fits (~128 B of images + vectors)
    clock.advance(1.0 / RECORD_HZ)
    feed(bus, clock)
    with pytest.raises(MemoryCeilingExceeded):
        rec.tick(clock.now_ns())
    assert not rec.recording
    assert rec.completed == []
    statuses = [e.payload for e in status_sub.drain()]
    assert statuses[-1].recording is False


def test_actions_track_consecutive_targets():
    bus, clock, rec = recorder_fixture()
    rec.start()
    feed(bus, clock)
    bus.publish(topics.TARGET_POSE, make_target(x=0.40))
    rec.tick(clock.now_ns())

    clock.advance(1.0 / RECORD_HZ)
    feed(bus, clock)
    bus.publish(topics.TARGET_POSE, make_target(x=0.44, y=0.01))
    rec.tick(clock.now_ns())

    episode = rec.stop()
    first, second = episode.frames
    assert np.allclose(first.action[:6], 0.0)  # no previous target yet
    assert second.action[0] == pytest.approx(0.04, abs=1e-6)
    assert second.action[1] == pytest.approx(0.01, abs=1e-6)


def test_no_target_yet_means_zero_deltas():
    bus, clock, rec = recorder_fixture()
    rec.start()
    for _ in range(5):
        feed(bus, clock, make_state(x=0.40 + 0.01))
        rec.tick(clock.now_ns())
        clock.advance(1.0 / RECORD_HZ)
    episode = rec.stop()
    assert all(np.allclose(f.action[:6], 0.0) for f in episode.frames)


def test_gripper_flag_follows_command_topic():
    bus, clock, rec = recorder_fixture()
    rec.start()
    feed(bus, clock)
    bus.publish(topics.GRIPPER_CMD, GripperCommand(closed=True, stamp_ns=clock.now_ns()))
    rec.tick(clock.now_ns())
    episode = rec.stop()
    assert episode.frames[0].action[6] == 1.0
    assert episode.frames[0].observation[12] == 0.0  # robot itself still open


def test_yaw_deltas_integrate_back_to_final_yaw():
    """Sum of wrapped yaw actions recovers the net rotation across the seam."""
    bus, clock, rec = recorder_fixture()
    rec.start()
    rng = random.Random(53)
    yaw = 3.0
    yaws = [yaw]
    for _ in range(80):
        feed(bus, clock)
        bus.publish(
            topics.TARGET_POSE,
            make_target(rpy=Rpy(0.0, 0.0, yaw), stamp_ns=clock.now_ns()),
        )
        rec.tick(clock.now_ns())
        yaw = (yaw + rng.uniform(0.0, 0.2) + math.pi) % (2 * math.pi) - math.pi
        yaws.append(yaw)
        clock.advance(1.0 / RECORD_HZ)
    episode = rec.stop()
    total = float(sum(f.action[5] for f in episode.frames))
    expected = ((yaws[-2] - yaws[0]) + math.pi) % (2 * math.pi) - math.pi
    assert (total - expected + math.pi) % (2 * math.pi) - math.pi == pytest.approx(0.0, abs=1e-4)


def test_images_keyed_by_source_name():
    bus, clock, rec = recorder_fixture()
    rec.start()
    feed(bus, clock)
    rec.tick(clock.now_ns())
    episode = rec.stop()
    assert set(episode.frames[0].images.keys()) == {"cam_test"}
    assert episode.frames[0].images["cam_test"].shape == (4, 4, 3)


def test_status_topic_reports_progress():
    bus, clock, rec = recorder_fixture()
    sub = bus.subscribe(topics.RECORD_STATUS, QosProfile(depth=128))
    rec.start()
    for _ in range(3):
        feed(bus, clock)
        rec.tick(clock.now_ns())
        clock.advance(1.0 / RECORD_HZ)
    rec.stop()
    statuses = [e.payload for e in sub.drain()]
    assert statuses[0].recording is True and statuses[0].frames == 0
    assert statuses[-1].recording is False and statuses[-1].episodes == 1
    assert max(s.frames for s in statuses) == 3
