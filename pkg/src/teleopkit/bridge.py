"""Interchangeable hardware layer between the bus and a controller.

A bridge owns exactly four endpoint calls — connect, send_command,
send_gripper, read_state — and two periodic duties: drain the freshest
target to the wire and publish state feedback.  Control topics are
subscribed keep-last depth 1, so when the consumer falls behind, stale
commands are simply evicted and the robot acts on the newest intent.

Two endpoints ship: `InProcessEndpoint` wraps a `SimArm` directly (the
deterministic default), `TcpEndpoint` speaks the line grammar in
`wire` over a loopback socket with TCP_NODELAY.  Porting to real
hardware means writing one more endpoint (see `bridge_template`).
"""

from __future__ import annotations

import logging
import socket
from dataclasses import dataclass
from typing import Optional, Protocol

from . import topics
from .bus import KEEP_LAST_ONE, MessageBus
from .clock import Clock, s_to_ns
from .messages import BridgeHealth, GripperCommand, RobotState, TargetPose
from .simarm import SimArm
from .wire import (
    WireCommand,
    WireState,
    format_grip,
    format_movl,
    from_wire_state,
    parse_state,
    robot_state_to_wire,
    to_wire,
)

log = logging.getLogger(__name__)


class EndpointError(ConnectionError):
    pass


class BridgeEndpoint(Protocol):
    def connect(self) -> None: ...
    def send_command(self, cmd: WireCommand) -> None: ...
    def send_gripper(self, closed: bool, seq: int) -> None: ...
    def read_state(self) -> WireState: ...
    def close(self) -> None: ...


class InProcessEndpoint:
    """Direct in-process connection to a simulated arm.

    `sent` logs every command that reached the "wire" in order; tests
    assert freshness against it.
    """

    def __init__(self, arm: SimArm, clock: Clock):
        self.arm = arm
        self.clock = clock
        self.sent: list[WireCommand] = []
        self.connected = False

    def connect(self) -> None:
        self.connected = True

    def send_command(self, cmd: WireCommand) -> None:
        if not self.connected:
            raise EndpointError("endpoint not connected")
        self.sent.append(cmd)
        now = self.clock.now_ns()
        state = from_wire_state(
            WireState(
                cmd.x_mm, cmd.y_mm, cmd.z_mm, cmd.rx_deg, cmd.ry_deg, cmd.rz_deg,
                gripper_closed=False, seq=cmd.seq,
            ),
            self.arm.config,
        )
        self.arm.advance_to(now)
        self.arm.command(
            TargetPose(position=state.ee_position, orientation=state.ee_orientation, stamp_ns=now),
            cmd.seq,
            now,
        )

    def send_gripper(self, closed: bool, seq: int) -> None:
        if not self.connected:
            raise EndpointError("endpoint not connected")
        self.arm.set_gripper(closed, self.clock.now_ns())

    def read_state(self) -> WireState:
        if not self.connected:
            raise EndpointError("endpoint not connected")
        self.arm.advance_to(self.clock.now_ns())
        return robot_state_to_wire(self.arm.state(), self.arm.active_seq)

    def close(self) -> None:
        self.connected = False


class TcpEndpoint:
    """Line-oriented TCP client for the mock (or a real) controller port."""

    def __init__(self, host: str = "127.0.0.1", port: int = 29999, timeout_s: float = 2.0):
        self.host = host
        self.port = port
        self.timeout_s = timeout_s
        self._sock: Optional[socket.socket] = None
        self._buffer = b""

    def connect(self) -> None:
        self.close()
        try:
            sock = socket.create_connection((self.host, self.port), timeout=self.timeout_s)
        except OSError as exc:
            raise EndpointError(f"connect to {self.host}:{self.port} failed: {exc}") from exc
        # Small writes must go out immediately; command latency beats throughput.
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        sock.settimeout(self.timeout_s)
        self._sock = sock
        self._buffer = b""

    def _send_line(self, line: str) -> None:
        if self._sock is None:
            raise EndpointError("endpoint not connected")
        try:
            self._sock.sendall(line.encode("ascii"))
        except OSError as exc:
            raise EndpointError(f"send failed: {exc}") from exc

    def _recv_line(self) -> str:
        if self._sock is None:
            raise EndpointError("endpoint not connected")
        while b"\n" not in self._buffer:
            try:
                chunk = self._sock.recv(4096)
            except OSError as exc:
                raise EndpointError(f"recv failed: {exc}") from exc
            if not chunk:
                raise EndpointError("connection closed by controller")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        return line.decode("ascii")

    def send_command(self, cmd: WireCommand) -> None:
        self._send_line(format_movl(cmd))

    def send_gripper(self, closed: bool, seq: int) -> None:
        self._send_line(format_grip(closed, seq))

    def read_state(self) -> WireState:
        self._send_line("READ\n")
        return parse_state(self._recv_line())

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            finally:
                self._sock = None


@dataclass
class BridgeStats:
    commands_sent: int = 0
    feedback_published: int = 0
    reconnects: int = 0
    send_failures: int = 0


class RobotBridge:
    """Bus bindings for one endpoint under one namespace."""

    RETRY_INITIAL_S = 0.05
    RETRY_MAX_S = 0.8

    def __init__(
        self,
        bus: MessageBus,
        namespace: str,
        endpoint: BridgeEndpoint,
        clock: Clock,
    ):
        self.bus = bus
        self.namespace = namespace
        self.endpoint = endpoint
        self.clock = clock
        self.stats = BridgeStats()
        ns = lambda base: topics.namespaced(namespace, base)
        self._feedback_topic = ns(topics.ROBOT_FEEDBACK)
        self._health_topic = ns(topics.BRIDGE_HEALTH)
        bus.advertise(self._feedback_topic, RobotState)
        bus.advertise(self._health_topic, BridgeHealth)
        # Depth 1 keep-last on both control topics: the wire only ever sees
        # the operator's most recent intent.
        self._sub_target = bus.subscribe(ns(topics.TARGET_POSE), KEEP_LAST_ONE)
        self._sub_gripper = bus.subscribe(ns(topics.GRIPPER_CMD), KEEP_LAST_ONE)
        self._degraded = False
        self._retry_at_ns: Optional[int] = None
        self._retry_backoff_s = self.RETRY_INITIAL_S

    def connect(self) -> None:
        self.endpoint.connect()
        self._degraded = False
        self._retry_at_ns = None
        self._retry_backoff_s = self.RETRY_INITIAL_S

    def drain_commands(self) -> Optional[int]:
        """Forward the freshest pending target; returns its sequence or None."""
        if not self._maybe_reconnect():
            self._sub_target.drain()  # degraded: evict, never queue stale intent
            self._sub_gripper.drain()
            return None
        sent_seq: Optional[int] = None
        grip_envs = self._sub_gripper.drain()
        if grip_envs:
            newest = grip_envs[-1]
            cmd: GripperCommand = newest.payload
            try:
                self.endpoint.send_gripper(cmd.closed, newest.sequence)
            except EndpointError as exc:
                self._mark_degraded(f"gripper send failed: {exc}")
                return None
        target_envs = self._sub_target.drain()
        if target_envs:
            newest = target_envs[-1]
            target: TargetPose = newest.payload
            try:
                self.endpoint.send_command(to_wire(target, seq=newest.sequence))
                self.stats.commands_sent += 1
                sent_seq = newest.sequence
            except EndpointError as exc:
                self._mark_degraded(f"command send failed: {exc}")
                return None
        return sent_seq

    def publish_feedback(self) -> Optional[RobotState]:
        if not self._maybe_reconnect():
            return None
        try:
            raw = self.endpoint.read_state()
        except EndpointError as exc:
            self._mark_degraded(f"state read failed: {exc}")
            return None
        state = from_wire_state(raw)
        state = RobotState(
            ee_position=state.ee_position,
            ee_orientation=state.ee_orientation,
            joints=state.joints,
            gripper_closed=state.gripper_closed,
            stamp_ns=self.clock.now_ns(),
        )
        self.bus.publish(self._feedback_topic, state)
        self.stats.feedback_published += 1
        return state

    def close(self) -> None:
        self.endpoint.close()

    # ------------------------------------------------------------------

    def _mark_degraded(self, reason: str) -> None:
        self.stats.send_failures += 1
        if not self._degraded:
            log.warning("[bridge%s] degraded: %s", self.namespace, reason)
        self._degraded = True
        self._retry_at_ns = self.clock.now_ns() + s_to_ns(self._retry_backoff_s)
        self._retry_backoff_s = min(self._retry_backoff_s * 2.0, self.RETRY_MAX_S)
        self.bus.publish(
            self._health_topic,
            BridgeHealth(degraded=True, reason=reason, stamp_ns=self.clock.now_ns()),
        )

    def _maybe_reconnect(self) -> bool:
        """True when the endpoint is usable."""
        if not self._degraded:
            return True
        if self._retry_at_ns is not None and self.clock.now_ns() < self._retry_at_ns:
            return False
        try:
            self.endpoint.connect()
        except EndpointError as exc:
            self._retry_at_ns = self.clock.now_ns() + s_to_ns(self._retry_backoff_s)
            self._retry_backoff_s = min(self._retry_backoff_s * 2.0, self.RETRY_MAX_S)
            log.warning("[bridge%s] reconnect failed: %s", self.namespace, exc)
            return False
        self._degraded = False
        self._retry_at_ns = None
        self._retry_backoff_s = self.RETRY_INITIAL_S
        self.stats.reconnects += 1
        # Anything that queued while we were down predates the reconnect;
        # discard instead of replaying stale commands.
        self._sub_target.drain()
        self._sub_gripper.drain()
        self.bus.publish(
            self._health_topic,
            BridgeHealth(degraded=False, reason="reconnected", stamp_ns=self.clock.now_ns()),
        )
        return True
