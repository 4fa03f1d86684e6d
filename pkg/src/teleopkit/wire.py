"""Millimeter/degree wire layer and the mock TCP controller endpoint.

The grammar is our own (the typical vendor real-time port is binary and
undocumented); it is newline-delimited ASCII chosen for debuggability
and bit-exact golden tests:

    MOVL x,y,z,rx,ry,rz,seq\\n          absolute move, mm / degrees
    GRIP g,seq\\n                       gripper, g in {0,1}
    READ\\n                             poll; server replies one STATE line
    STATE x,y,z,rx,ry,rz,grip,seq\\n    pose feedback, seq of last applied MOVL

Floats are serialized with repr so parse(format(x)) == x exactly.
"""

from __future__ import annotations

import logging
import math
import socket
import threading
from dataclasses import dataclass

from .clock import Clock, WallClock
from .messages import RobotState, TargetPose
from .posemath import Quat, Rpy, Vec3, quat_to_rpy, rpy_to_quat
from .simarm import SimArm, SimArmConfig, placeholder_joints

log = logging.getLogger(__name__)

DEFAULT_WIRE_PORT = 29999


class WireProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class WireCommand:
    """Absolute Cartesian command in controller-native units."""

    x_mm: float
    y_mm: float
    z_mm: float
    rx_deg: float
    ry_deg: float
    rz_deg: float
    seq: int

    def __post_init__(self):
        values = (self.x_mm, self.y_mm, self.z_mm, self.rx_deg, self.ry_deg, self.rz_deg)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"WireCommand fields must be finite: {values}")


@dataclass(frozen=True)
class WireState:
    """Controller-native state reply (same fields plus gripper)."""

    x_mm: float
    y_mm: float
    z_mm: float
    rx_deg: float
    ry_deg: float
    rz_deg: float
    gripper_closed: bool
    seq: int


def to_wire(target: TargetPose, seq: int = 0) -> WireCommand:
    """Meters/quaternion -> millimeters/Euler degrees.

    A gimbal-flagged conversion still emits a command (yaw folded to 0);
    it is logged rather than fatal since the next 50 Hz sample recovers.
    """
    rpy = quat_to_rpy(target.orientation)
    if rpy.gimbal_lock:
        log.warning("to_wire: gimbal-locked orientation, yaw folded into roll")
    return WireCommand(
        x_mm=target.position.x * 1000.0,
        y_mm=target.position.y * 1000.0,
        z_mm=target.position.z * 1000.0,
        rx_deg=math.degrees(rpy.roll),
        ry_deg=math.degrees(rpy.pitch),
        rz_deg=math.degrees(rpy.yaw),
        seq=seq,
    )


def from_wire_state(raw: WireState, config: SimArmConfig | None = None) -> RobotState:
    """Millimeters/degrees -> meters/quaternion RobotState.

    Joints are reconstructed with the placeholder kinematics since the
    wire state carries only the end-effector pose.
    """
    values = (raw.x_mm, raw.y_mm, raw.z_mm, raw.rx_deg, raw.ry_deg, raw.rz_deg)
    if not all(math.isfinite(v) for v in values):
        raise WireProtocolError(f"non-finite wire state: {values}")
    position = Vec3(raw.x_mm / 1000.0, raw.y_mm / 1000.0, raw.z_mm / 1000.0)
    rpy = Rpy(
        math.radians(raw.rx_deg), math.radians(raw.ry_deg), math.radians(raw.rz_deg)
    ).wrapped()
    cfg = config or SimArmConfig()
    return RobotState(
        ee_position=position,
        ee_orientation=rpy_to_quat(rpy),
        joints=placeholder_joints(position, rpy, cfg),
        gripper_closed=raw.gripper_closed,
        stamp_ns=0,
    )


def robot_state_to_wire(state: RobotState, seq: int) -> WireState:
    rpy = quat_to_rpy(state.ee_orientation)
    return WireState(
        x_mm=state.ee_position.x * 1000.0,
        y_mm=state.ee_position.y * 1000.0,
        z_mm=state.ee_position.z * 1000.0,
        rx_deg=math.degrees(rpy.roll),
        ry_deg=math.degrees(rpy.pitch),
        rz_deg=math.degrees(rpy.yaw),
        gripper_closed=state.gripper_closed,
        seq=seq,
    )


# ----------------------------------------------------------------------
# line grammar


def format_movl(cmd: WireCommand) -> str:
    # float() first: repr of a numpy scalar would not parse back
    return (
        f"MOVL {float(cmd.x_mm)!r},{float(cmd.y_mm)!r},{float(cmd.z_mm)!r},"
        f"{float(cmd.rx_deg)!r},{float(cmd.ry_deg)!r},{float(cmd.rz_deg)!r},"
        f"{int(cmd.seq)}\n"
    )


def format_grip(closed: bool, seq: int) -> str:
    return f"GRIP {1 if closed else 0},{seq}\n"


def format_state(state: WireState) -> str:
    return (
        f"STATE {float(state.x_mm)!r},{float(state.y_mm)!r},{float(state.z_mm)!r},"
        f"{float(state.rx_deg)!r},{float(state.ry_deg)!r},{float(state.rz_deg)!r},"
        f"{1 if state.gripper_closed else 0},{int(state.seq)}\n"
    )


def parse_movl(line: str) -> WireCommand:
    body = _expect_verb(line, "MOVL")
    parts = body.split(",")
    if len(parts) != 7:
        raise WireProtocolError(f"MOVL needs 7 fields, got {len(parts)}: {line!r}")
    try:
        floats = [float(p) for p in parts[:6]]
        seq = int(parts[6])
    except ValueError as exc:
        raise WireProtocolError(f"bad MOVL field in {line!r}: {exc}") from None
    return WireCommand(*floats, seq=seq)


def parse_state(line: str) -> WireState:
    body = _expect_verb(line, "STATE")
    parts = body.split(",")
    if len(parts) != 8:
        raise WireProtocolError(f"STATE needs 8 fields, got {len(parts)}: {line!r}")
    try:
        floats = [float(p) for p in parts[:6]]
        grip = int(parts[6])
        seq = int(parts[7])
    except ValueError as exc:
        raise WireProtocolError(f"bad STATE field in {line!r}: {exc}") from None
    if grip not in (0, 1):
        raise WireProtocolError(f"STATE grip must be 0/1, got {grip}")
    return WireState(*floats, gripper_closed=bool(grip), seq=seq)


def parse_grip(line: str) -> tuple[bool, int]:
    body = _expect_verb(line, "GRIP")
    parts = body.split(",")
    if len(parts) != 2:
        raise WireProtocolError(f"GRIP needs 2 fields: {line!r}")
    try:
        g = int(parts[0])
        seq = int(parts[1])
    except ValueError as exc:
        raise WireProtocolError(f"bad GRIP field in {line!r}: {exc}") from None
    if g not in (0, 1):
        raise WireProtocolError(f"GRIP value must be 0/1, got {g}")
    return bool(g), seq


def _expect_verb(line: str, verb: str) -> str:
    line = line.strip()
    if not line.startswith(verb + " "):
        raise WireProtocolError(f"expected {verb} line, got {line!r}")
    return line[len(verb) + 1 :]


# ----------------------------------------------------------------------
# mock controller


class MockWireServer:
    """Loopback TCP controller hosting a `SimArm` behind the wire grammar.

    One client at a time is plenty for a bridge.  Every received line is
    kept in `received` for assertions; MOVL sequence numbers additionally
    land in `movl_seqs` in arrival order.
    """

    def __init__(
        self,
        config: SimArmConfig | None = None,
        host: str = "127.0.0.1",
        port: int = 0,
        clock: Clock | None = None,
    ):
        self.config = config or SimArmConfig()
        self.clock = clock or WallClock()
        self.arm = SimArm(self.config, start_ns=self.clock.now_ns())
        self.host = host
        self._requested_port = port
        self.port: int = port
        self.received: list[str] = []
        self.movl_seqs: list[int] = []
        self._lock = threading.Lock()
        self._server_sock: socket.socket | None = None
        self._thread: threading.Thread | None = None
        self._stop = threading.Event()

    def start(self) -> None:
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind((self.host, self._requested_port))
        sock.listen(2)
        sock.settimeout(0.2)
        self.port = sock.getsockname()[1]
        self._server_sock = sock
        self._stop.clear()
        self._thread = threading.Thread(target=self._serve, name="mock-wire", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread:
            self._thread.join(timeout=2.0)
        if self._server_sock:
            self._server_sock.close()
            self._server_sock = None

    def _serve(self) -> None:
        assert self._server_sock is not None
        while not self._stop.is_set():
            try:
                conn, _ = self._server_sock.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            conn.settimeout(0.2)
            try:
                self._handle(conn)
            finally:
                conn.close()

    def _handle(self, conn: socket.socket) -> None:
        buffer = b""
        while not self._stop.is_set():
            try:
                chunk = conn.recv(4096)
            except socket.timeout:
                continue
            except OSError:
                return
            if not chunk:
                return
            buffer += chunk
            while b"\n" in buffer:
                raw, buffer = buffer.split(b"\n", 1)
                reply = self._dispatch(raw.decode("ascii", errors="replace"))
                if reply:
                    conn.sendall(reply.encode("ascii"))

    def _dispatch(self, line: str) -> str:
        line = line.strip()
        if not line:
            return ""
        with self._lock:
            self.received.append(line)
            now = self.clock.now_ns()
            try:
                if line.startswith("MOVL"):
                    cmd = parse_movl(line)
                    self.movl_seqs.append(cmd.seq)
                    state = from_wire_state(
                        WireState(
                            cmd.x_mm, cmd.y_mm, cmd.z_mm,
                            cmd.rx_deg, cmd.ry_deg, cmd.rz_deg,
                            gripper_closed=False, seq=cmd.seq,
                        ),
                        self.config,
                    )
                    target = TargetPose(
                        position=state.ee_position,
                        orientation=state.ee_orientation,
                        stamp_ns=now,
                    )
                    self.arm.advance_to(now)
                    self.arm.command(target, cmd.seq, now)
                    return ""
                if line.startswith("GRIP"):
                    closed, _ = parse_grip(line)
                    self.arm.set_gripper(closed, now)
                    return ""
                if line == "READ":
                    self.arm.advance_to(now)
                    ws = robot_state_to_wire(self.arm.state(), self.arm.active_seq)
                    return format_state(ws)
            except WireProtocolError as exc:
                return f"ERR {exc}\n"
            return f"ERR unknown verb in {line!r}\n"
