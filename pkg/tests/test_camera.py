"""Synthetic camera determinism and image-sequence replay."""

import numpy as np
import pytest

from helpers import DEFAULT_WORKSPACE, make_state, virtual_bus
from teleopkit.bus import QosProfile
from teleopkit.camera import (
    CameraConfig,
    ImageSequenceSource,
    SyntheticCamera,
    frame_digest,
)


def camera_fixture(seed=0, namespace=""):
    bus, clock = virtual_bus()
    cam = SyntheticCamera(bus, CameraConfig(seed=seed), DEFAULT_WORKSPACE, namespace)
    return bus, clock, cam


def test_render_shape_and_dtype():
    _, _, cam = camera_fixture()
    img = cam.render(make_state())
    assert img.shape == (120, 160, 3)
    assert img.dtype == np.uint8


def test_same_seed_same_pixels():
    _, _, cam_a = camera_fixture(seed=7)
    _, _, cam_b = camera_fixture(seed=7)
    state = make_state(x=0.33, y=-0.1, z=0.22)
    assert frame_digest(cam_a.render(state)) == frame_digest(cam_b.render(state))


def test_different_seed_different_pixels():
    _, _, cam_a = camera_fixture(seed=1)
    _, _, cam_b = camera_fixture(seed=2)
    state = make_state()
    assert frame_digest(cam_a.render(state)) != frame_digest(cam_b.render(state))


def test_render_is_pure_function_of_state():
    _, _, cam = camera_fixture(seed=3)
    state = make_state(x=0.5, y=0.2, z=0.4)
    digests = {frame_digest(cam.render(state)) for _ in range(5)}
    assert len(digests) == 1


def test_ee_position_moves_the_marker():
    _, _, cam = camera_fixture()
    a = cam.render(make_state(x=0.20, y=-0.30))
    b = cam.render(make_state(x=0.60, y=0.30))
    assert frame_digest(a) != frame_digest(b)


def test_gripper_state_flips_marker_color():
    _, _, cam = camera_fixture()
    open_img = cam.render(make_state(gripper_closed=False))
    closed_img = cam.render(make_state(gripper_closed=True))
    assert frame_digest(open_img) != frame_digest(closed_img)
    # the marker sits mid-canvas for the home pose; sample its center color
    row, col = 60, 80
    assert tuple(open_img[row, col]) == (60, 220, 60)
    assert tuple(closed_img[row, col]) == (220, 60, 60)


def test_height_controls_marker_size():
    _, _, cam = camera_fixture()
    lo = cam.render(make_state(z=DEFAULT_WORKSPACE.z[0]))
    hi = cam.render(make_state(z=DEFAULT_WORKSPACE.z[1]))
    lo_green = int(np.sum(np.all(lo == (60, 220, 60), axis=-1)))
    hi_green = int(np.sum(np.all(hi == (60, 220, 60), axis=-1)))
    assert hi_green > lo_green


def test_joint_readout_tracks_joints():
    _, _, cam = camera_fixture()
    a = cam.render(make_state())
    state_b = make_state()
    b = cam.render(
        type(state_b)(
            ee_position=state_b.ee_position,
            ee_orientation=state_b.ee_orientation,
            joints=(1.5, 0.1, 0.2, 0.3, 0.4, 0.5),
            gripper_closed=state_b.gripper_closed,
            stamp_ns=state_b.stamp_ns,
        )
    )
    assert not np.array_equal(a[-6:, :8], b[-6:, :8])


def test_out_of_bounds_state_still_renders():
    _, _, cam = camera_fixture()
    img = cam.render(make_state(x=99.0, y=-99.0, z=5.0))
    assert img.shape == (120, 160, 3)


def test_tick_publishes_on_camera_topic():
    bus, clock, cam = camera_fixture()
    sub = bus.subscribe(cam.topic, QosProfile(depth=8))
    frame = cam.tick(make_state(), clock.now_ns())
    assert frame is not None
    envs = sub.drain()
    assert len(envs) == 1
    assert envs[0].payload.source == "cam_front"
    assert cam.frames_published == 1


def test_freeze_stops_publishing_until_unfrozen():
    bus, clock, cam = camera_fixture()
    sub = bus.subscribe(cam.topic, QosProfile(depth=8))
    cam.tick(make_state(), 0)
    cam.freeze()
    for t in range(1, 6):
        assert cam.tick(make_state(), t) is None
    cam.unfreeze()
    cam.tick(make_state(), 10)
    assert cam.frames_published == 2
    assert len(sub.drain()) == 2


def test_namespaced_topic():
    _, _, cam = camera_fixture(namespace="/left")
    assert cam.topic == "/left/teleop/cam_front"


def _write_sequence(directory, count, start_value=0):
    import cv2

    for i in range(count):
        img = np.full((32, 48, 3), start_value + i * 10, dtype=np.uint8)
        cv2.imwrite(str(directory / f"frame_{i:03d}.png"), img)


def test_image_sequence_plays_in_sorted_order(tmp_path):
    bus, clock = virtual_bus()
    _write_sequence(tmp_path, 3)
    src = ImageSequenceSource(bus, "cam_disk", tmp_path)
    values = [int(src.tick(make_state(), t).pixels[0, 0, 0]) for t in range(3)]
    assert values == [0, 10, 20]


def test_image_sequence_holds_last_frame(tmp_path):
    bus, clock = virtual_bus()
    _write_sequence(tmp_path, 2, start_value=5)
    src = ImageSequenceSource(bus, "cam_disk", tmp_path)
    for t in range(6):
        frame = src.tick(make_state(), t)
    assert int(frame.pixels[0, 0, 0]) == 15  # still the second (last) image


def test_image_sequence_empty_directory_raises(tmp_path):
    bus, clock = virtual_bus()
    with pytest.raises(FileNotFoundError):
        ImageSequenceSource(bus, "cam_disk", tmp_path)


def test_image_sequence_mixed_shapes_rejected(tmp_path):
    import cv2

    bus, clock = virtual_bus()
    cv2.imwrite(str(tmp_path / "a.png"), np.zeros((32, 48, 3), dtype=np.uint8))
    cv2.imwrite(str(tmp_path / "b.png"), np.zeros((16, 16, 3), dtype=np.uint8))
    with pytest.raises(ValueError):
        ImageSequenceSource(bus, "cam_disk", tmp_path)


def test_frame_digest_is_content_hash():
    img = np.zeros((4, 4, 3), dtype=np.uint8)
    same = np.zeros((4, 4, 3), dtype=np.uint8)
    assert frame_digest(img) == frame_digest(same)
    same[0, 0, 0] = 1
    assert frame_digest(img) != frame_digest(same)
