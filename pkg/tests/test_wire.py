"""Unit/format translation and the line grammar for the mock controller."""

import math
import socket
import time

import numpy as np
import pytest

from helpers import make_state, make_target, random_quat
from teleopkit.clock import VirtualClock, s_to_ns
from teleopkit.messages import TargetPose
from teleopkit.posemath import Quat, Rpy, Vec3, quat_to_rpy, rpy_to_quat
from teleopkit.simarm import SimArmConfig
from teleopkit.wire import (
    MockWireServer,
    WireCommand,
    WireProtocolError,
    WireState,
    format_grip,
    format_movl,
    format_state,
    from_wire_state,
    parse_grip,
    parse_movl,
    parse_state,
    robot_state_to_wire,
    to_wire,
)

# ---------------------------------------------------------------------------
# unit translation


def test_half_meter_identity_pose():
    cmd = to_wire(make_target(x=0.5, y=0.0, z=0.0))
    assert (cmd.x_mm, cmd.y_mm, cmd.z_mm) == (500.0, 0.0, 0.0)
    assert (cmd.rx_deg, cmd.ry_deg, cmd.rz_deg) == (0.0, 0.0, 0.0)


def test_millimeter_precision():
    cmd = to_wire(make_target(x=0.1234, y=0.0, z=0.1))
    assert cmd.x_mm == pytest.approx(123.4, abs=1e-9)


def test_yaw_90_degrees():
    cmd = to_wire(make_target(rpy=Rpy(0, 0, math.pi / 2)))
    assert cmd.rz_deg == pytest.approx(90.0, abs=1e-9)
    assert cmd.rx_deg == pytest.approx(0.0, abs=1e-9)


def test_wire_180_roll_pitch_yaw_to_quat():
    # (0,0,180) deg comes back as the canonical quaternion (0,0,0,1)
    state = from_wire_state(
        WireState(400.0, 0.0, 300.0, 0.0, 0.0, 180.0, gripper_closed=False, seq=0)
    )
    q = state.ee_orientation
    assert abs(q.w) < 1e-9 and abs(q.x) < 1e-9 and abs(q.y) < 1e-9
    assert q.z == pytest.approx(1.0, abs=1e-9)


def test_round_trip_1000_random_states():
    """RobotState -> wire -> RobotState reproduces within 1e-6 native units."""
    rng = np.random.default_rng(127)
    for i in range(1000):
        state = make_state(
            x=float(rng.uniform(-0.8, 0.8)),
            y=float(rng.uniform(-0.8, 0.8)),
            z=float(rng.uniform(0.0, 0.8)),
            rpy=Rpy(*(rng.uniform(-math.pi, math.pi, size=3) * [1, 0.45, 1])),
            gripper_closed=bool(rng.integers(2)),
        )
        wire_state = robot_state_to_wire(state, seq=i)
        back = from_wire_state(wire_state)
        assert back.ee_position.distance_to(state.ee_position) < 1e-6 / 1000.0  # 1e-6 mm
        assert back.ee_orientation.approx_equal(state.ee_orientation, tol=1e-6)
        assert back.gripper_closed == state.gripper_closed
        again = robot_state_to_wire(back, seq=i)
        for field in ("x_mm", "y_mm", "z_mm", "rx_deg", "ry_deg", "rz_deg"):
            assert getattr(again, field) == pytest.approx(
                getattr(wire_state, field), abs=1e-6
            )


def test_command_round_trip_through_target():
    rng = np.random.default_rng(131)
    for i in range(200):
        target = make_target(
            x=float(rng.uniform(0.2, 0.6)),
            y=float(rng.uniform(-0.3, 0.3)),
            z=float(rng.uniform(0.1, 0.5)),
            rpy=Rpy(*(rng.uniform(-math.pi, math.pi, size=3) * [1, 0.45, 1])),
        )
        cmd = to_wire(target, seq=i)
        state = from_wire_state(
            WireState(
                cmd.x_mm, cmd.y_mm, cmd.z_mm, cmd.rx_deg, cmd.ry_deg, cmd.rz_deg,
                gripper_closed=False, seq=i,
            )
        )
        assert state.ee_position.distance_to(target.position) < 1e-9
        assert state.ee_orientation.approx_equal(target.orientation, tol=1e-9)


def test_nonfinite_wire_state_rejected():
    with pytest.raises(WireProtocolError):
        from_wire_state(
            WireState(math.nan, 0, 0, 0, 0, 0, gripper_closed=False, seq=0)
        )


# ---------------------------------------------------------------------------
# line grammar


def test_movl_format_and_parse_exact():
    cmd = WireCommand(500.0, -12.25, 300.125, 10.5, -0.25, 179.9, seq=42)
    line = format_movl(cmd)
    assert line.startswith("MOVL ") and line.endswith("\n")
    assert parse_movl(line) == cmd


def test_state_format_and_parse_exact():
    state = WireState(400.0, 0.0, 300.0, 0.0, 0.0, 90.0, gripper_closed=True, seq=7)
    line = format_state(state)
    assert line == "STATE 400.0,0.0,300.0,0.0,0.0,90.0,1,7\n"
    assert parse_state(line) == state


def test_grip_format_and_parse():
    assert format_grip(True, 3) == "GRIP 1,3\n"
    assert parse_grip("GRIP 1,3\n") == (True, 3)
    assert parse_grip("GRIP 0,9") == (False, 9)


def test_grammar_repr_round_trip_fuzz():
    """repr-serialized floats parse back bit-exactly."""
    rng = np.random.default_rng(137)
    for _ in range(1000):
        cmd = WireCommand(*(float(v) for v in rng.uniform(-1e3, 1e3, size=6)), seq=int(rng.integers(1 << 31)))
        assert parse_movl(format_movl(cmd)) == cmd  # no tolerance at all


def test_parse_rejects_garbage():
    for bad in (
        "MOVL 1,2,3\n",
        "MOVL a,b,c,d,e,f,g\n",
        "JUMP 1,2,3,4,5,6,7\n",
        "STATE 1,2,3,4,5,6,2,0\n",  # grip must be 0/1
        "STATE 1,2,3,4,5,6,1\n",
        "GRIP 5,1\n",
        "",
    ):
        with pytest.raises(WireProtocolError):
            if bad.startswith("STATE"):
                parse_state(bad)
            elif bad.startswith("GRIP"):
                parse_grip(bad)
            else:
                parse_movl(bad)


# ---------------------------------------------------------------------------
# mock controller over TCP


def wire_client(port: int) -> socket.socket:
    sock = socket.create_connection(("127.0.0.1", port), timeout=2.0)
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    return sock


def recv_line(sock: socket.socket) -> str:
    buf = b""
    while not buf.endswith(b"\n"):
        chunk = sock.recv(4096)
        if not chunk:
            break
        buf += chunk
    return buf.decode("ascii")


def test_mock_server_read_returns_state():
    server = MockWireServer(port=0)
    server.start()
    try:
        with wire_client(server.port) as sock:
            sock.sendall(b"READ\n")
            line = recv_line(sock)
            state = parse_state(line)
            assert state.x_mm == pytest.approx(400.0, abs=1e-6)
            assert state.z_mm == pytest.approx(300.0, abs=1e-6)
            assert state.seq == -1  # nothing applied yet
    finally:
        server.stop()


def test_mock_server_applies_movl_and_grip():
    clock = VirtualClock()
    server = MockWireServer(port=0, clock=clock, config=SimArmConfig(lag_time_constant=0.01))
    server.start()
    try:
        with wire_client(server.port) as sock:
            sock.sendall(format_movl(WireCommand(450.0, 0.0, 300.0, 0, 0, 0, seq=5)).encode())
            sock.sendall(b"GRIP 1,6\n")
            deadline = time.monotonic() + 2.0
            while len(server.received) < 2 and time.monotonic() < deadline:
                time.sleep(0.005)  # wait for the server thread to consume both lines
            clock.advance(1.0)
            sock.sendall(b"READ\n")
            state = parse_state(recv_line(sock))
            assert state.x_mm == pytest.approx(450.0, abs=0.5)
            assert state.gripper_closed
            assert state.seq == 5
        assert server.movl_seqs == [5]
    finally:
        server.stop()


def test_mock_server_err_on_garbage_keeps_session():
    server = MockWireServer(port=0)
    server.start()
    try:
        with wire_client(server.port) as sock:
            sock.sendall(b"FLY 1,2,3\n")
            assert recv_line(sock).startswith("ERR")
            sock.sendall(b"MOVL 1,2\n")
            assert recv_line(sock).startswith("ERR")
            sock.sendall(b"READ\n")  # still serving
            assert recv_line(sock).startswith("STATE ")
    finally:
        server.stop()


def test_gimbal_locked_target_still_emits_command():
    target = TargetPose(
        position=Vec3(0.4, 0.0, 0.3),
        orientation=rpy_to_quat(Rpy(0.2, math.pi / 2, 0.0)),
        stamp_ns=0,
    )
    cmd = to_wire(target)
    assert math.isfinite(cmd.rx_deg) and math.isfinite(cmd.ry_deg)
    assert cmd.rz_deg == 0.0  # yaw folded by convention


def test_grammar_survives_numpy_scalar_fields():
    # planner targets carry values produced by matrix math; the line
    # grammar must emit plain parseable numbers for them regardless
    cmd = WireCommand(
        np.float64(508.05), np.float64(-30.2), np.float64(150.0),
        np.float64(10.0), np.float64(-20.0), np.float64(170.0), seq=np.int64(7),
    )
    back = parse_movl(format_movl(cmd))
    assert back.x_mm == pytest.approx(508.05, abs=1e-12)
    assert back.seq == 7
    st = WireState(
        np.float64(400.0), np.float64(0.0), np.float64(300.0),
        np.float64(1.0), np.float64(2.0), np.float64(3.0), True, np.int64(9),
    )
    parsed = parse_state(format_state(st))
    assert parsed.z_mm == pytest.approx(300.0, abs=1e-12)
    assert parsed.gripper_closed is True and parsed.seq == 9
