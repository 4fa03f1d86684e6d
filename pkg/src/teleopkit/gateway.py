"""WebSocket gateway speaking a rosbridge-style JSON protocol.

Phone-like clients connect, ``advertise`` the topics they will feed
(which is how a device picks its namespace at runtime), ``publish`` pose
and button frames at ~50 Hz, and ``subscribe`` to feedback topics for
display.  Frames:

    {"op": "advertise", "topic": "/left/teleop/phone_pose"}
    {"op": "publish",   "topic": "...", "msg": {...}}
    {"op": "subscribe", "topic": "/left/teleop/robot_feedback"}
    {"op": "status"}

Malformed input never kills a connection: the offending frame gets an
``{"op": "error", "reason": ...}`` reply and the stream continues.  The
gateway stamps bus envelopes with its own clock; client stamps are
informational only, since phone clocks are not synchronized.

If a connection that was feeding poses drops, a safety hold is published
so the planner re-engages its clutch — a reconnecting operator must
deliberately release again.
"""

from __future__ import annotations

import json
import logging
import math
import statistics
import threading
from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional

from websockets.sync.server import Server, ServerConnection, serve

from . import topics
from .bus import MessageBus, QosProfile, TopicName
from .clock import Clock, WallClock
from .messages import (
    BridgeHealth,
    ButtonEvent,
    DecodeError,
    PlannerStatus,
    PoseSample,
    RecordControl,
    RecordStatus,
    RobotState,
    SafetyHold,
    TargetPose,
    decode_button,
    decode_pose,
    decode_record_control,
    encode_planner_status,
    encode_pose,
    encode_record_status,
    encode_robot_state,
    encode_target_pose,
)

log = logging.getLogger(__name__)

DEFAULT_PORT = 9090

# Topic leaf -> (payload type, wire decoder) for client-publishable topics.
_INGEST = {
    "phone_pose": (PoseSample, decode_pose),
    "button": (ButtonEvent, decode_button),
    "record_ctl": (RecordControl, decode_record_control),
}

# Topic leaf -> wire encoder for client-subscribable topics.
_EGRESS: dict[str, Callable] = {
    "robot_feedback": encode_robot_state,
    "planner_state": encode_planner_status,
    "record_status": encode_record_status,
    "target_pose": encode_target_pose,
    "phone_pose": encode_pose,
    "bridge_health": lambda h: {"degraded": h.degraded, "reason": h.reason, "stamp_ns": h.stamp_ns},
}


@dataclass(frozen=True)
class RateReport:
    samples: int
    mean_interval_ms: float
    jitter_ms: float
    drop_estimate: int


class RateMonitor:
    """Sliding-window inter-arrival statistics for one pose stream."""

    def __init__(self, nominal_interval_ms: float = 20.0, window: int = 512):
        self.nominal_interval_ms = nominal_interval_ms
        self._arrivals_ns: deque[int] = deque(maxlen=window)

    def observe(self, t_ns: int) -> None:
        self._arrivals_ns.append(t_ns)

    @property
    def samples(self) -> int:
        return len(self._arrivals_ns)

    def report(self) -> RateReport:
        if len(self._arrivals_ns) < 2:
            raise ValueError("rate report needs at least 2 samples")
        arrivals = list(self._arrivals_ns)
        intervals_ms = [
            (b - a) / 1e6 for a, b in zip(arrivals, arrivals[1:])
        ]
        mean = sum(intervals_ms) / len(intervals_ms)
        jitter = statistics.pstdev(intervals_ms) if len(intervals_ms) > 1 else 0.0
        dropped = 0
        for gap in intervals_ms:
            if gap > 1.5 * self.nominal_interval_ms:
                dropped += max(0, round(gap / self.nominal_interval_ms) - 1)
        return RateReport(
            samples=len(arrivals),
            mean_interval_ms=mean,
            jitter_ms=jitter,
            drop_estimate=dropped,
        )


class _Session:
    """Per-connection state: advertised topics, subscriptions, stats."""

    def __init__(self, gateway: "PhoneGateway", conn: ServerConnection):
        self.gateway = gateway
        self.conn = conn
        self.ingest: dict[str, tuple[type, Callable]] = {}  # full topic -> (type, decoder)
        self.pose_namespaces: set[str] = set()
        self.last_pose_stamp: dict[str, float] = {}
        self.rate_monitor = RateMonitor(
            nominal_interval_ms=1000.0 / gateway.nominal_rate_hz
        )
        self.accepted = 0
        self.decode_errors = 0
        self._subs: list[tuple[str, Callable, object]] = []
        self._closed = threading.Event()
        self._forwarder: Optional[threading.Thread] = None

    # ---- ops ---------------------------------------------------------

    def handle_frame(self, raw: str | bytes) -> None:
        if isinstance(raw, bytes):
            self._error("binary frames not supported")
            return
        try:
            frame = json.loads(raw)
        except json.JSONDecodeError as exc:
            self._error(f"malformed JSON: {exc.msg}")
            return
        if not isinstance(frame, dict) or "op" not in frame:
            self._error("frame must be an object with an 'op' field")
            return
        op = frame.get("op")
        try:
            if op == "advertise":
                self._op_advertise(frame)
            elif op == "publish":
                self._op_publish(frame)
            elif op == "subscribe":
                self._op_subscribe(frame)
            elif op == "status":
                self._op_status()
            else:
                self._error(f"unknown op {op!r}")
        except DecodeError as exc:
            self._error(str(exc))
        except Exception as exc:  # arbitrary bytes must never kill the server
            log.exception("gateway frame handling failed")
            self._error(f"internal error: {exc}")

    def _resolve(self, frame: dict) -> tuple[str, str]:
        topic = frame.get("topic")
        if not isinstance(topic, str) or not topic:
            raise DecodeError("missing field 'topic'")
        try:
            name = TopicName.parse(topic, base_prefix=topics.BASE_PREFIX)
        except ValueError as exc:
            raise DecodeError(str(exc)) from None
        leaf = name.base.split("/", 1)[1]
        return name.full, leaf

    def _op_advertise(self, frame: dict) -> None:
        full, leaf = self._resolve(frame)
        if leaf not in _INGEST:
            raise DecodeError(f"topic {full!r} is not client-publishable")
        payload_type, decoder = _INGEST[leaf]
        self.gateway.bus.advertise(full, payload_type)
        self.ingest[full] = (payload_type, decoder)
        if leaf == "phone_pose":
            self.pose_namespaces.add(TopicName.parse(full).namespace)

    def _op_publish(self, frame: dict) -> None:
        full, leaf = self._resolve(frame)
        if full not in self.ingest:
            self._op_advertise({"topic": full})  # implicit advertise
        _, decoder = self.ingest[full]
        if "msg" not in frame:
            raise DecodeError("publish requires 'msg'")
        payload = decoder(frame["msg"])
        if isinstance(payload, PoseSample):
            last = self.last_pose_stamp.get(full)
            if last is not None and payload.stamp_ms < last:
                raise DecodeError(
                    f"pose stamp regressed: {payload.stamp_ms} < {last}"
                )
            self.last_pose_stamp[full] = payload.stamp_ms
            self.rate_monitor.observe(self.gateway.wall.now_ns())
        self.gateway.bus.publish(full, payload)
        self.accepted += 1

    def _op_subscribe(self, frame: dict) -> None:
        full, leaf = self._resolve(frame)
        encoder = _EGRESS.get(leaf)
        if encoder is None:
            raise DecodeError(f"topic {full!r} is not client-subscribable")
        sub = self.gateway.bus.subscribe(full, QosProfile(depth=8))
        self._subs.append((full, encoder, sub))
        if self._forwarder is None:
            self._forwarder = threading.Thread(
                target=self._forward_loop, name="gw-forward", daemon=True
            )
            self._forwarder.start()

    def _op_status(self) -> None:
        status: dict = {
            "op": "status",
            "accepted": self.accepted,
            "decode_errors": self.decode_errors,
        }
        if self.rate_monitor.samples >= 2:
            report = self.rate_monitor.report()
            status["rate"] = {
                "samples": report.samples,
                "mean_interval_ms": report.mean_interval_ms,
                "jitter_ms": report.jitter_ms,
                "drop_estimate": report.drop_estimate,
            }
        self._send(status)

    # ---- plumbing ----------------------------------------------------

    def _forward_loop(self) -> None:
        while not self._closed.wait(self.gateway.forward_interval_s):
            for full, encoder, sub in self._subs:
                for env in sub.drain():
                    self._send({"op": "publish", "topic": full, "msg": encoder(env.payload)})

    def _send(self, frame: dict) -> None:
        try:
            self.conn.send(json.dumps(frame))
        except Exception:
            self._closed.set()

    def _error(self, reason: str) -> None:
        self.decode_errors += 1
        self._send({"op": "error", "reason": reason})

    def close(self) -> None:
        self._closed.set()
        for _, _, sub in self._subs:
            self.gateway.bus.unsubscribe(sub)
        if self.pose_namespaces and self.accepted > 0:
            # The operator's device went away mid-stream: hold position
            # until someone deliberately releases the clutch again.
            for namespace in sorted(self.pose_namespaces):
                self.gateway.bus.publish(
                    topics.namespaced(namespace, topics.SAFETY_HOLD),
                    SafetyHold(
                        reason="pose client disconnected",
                        stamp_ns=self.gateway.clock.now_ns(),
                    ),
                )


class PhoneGateway:
    """Threaded WebSocket server bridging clients onto the bus."""

    def __init__(
        self,
        bus: MessageBus,
        clock: Clock,
        host: str = "127.0.0.1",
        port: int = DEFAULT_PORT,
        nominal_rate_hz: float = 50.0,
        forward_interval_s: float = 0.005,
    ):
        self.bus = bus
        self.clock = clock
        self.wall = WallClock()  # arrival statistics are wall-time by nature
        self.host = host
        self.requested_port = port
        self.port: int = port
        self.nominal_rate_hz = nominal_rate_hz
        self.forward_interval_s = forward_interval_s
        self.sessions: list[_Session] = []
        self._server: Optional[Server] = None
        self._thread: Optional[threading.Thread] = None
        self._lock = threading.Lock()

    def start(self) -> None:
        try:
            self._server = serve(self._handler, self.host, self.requested_port)
        except OSError as exc:
            raise OSError(f"gateway bind to {self.host}:{self.requested_port} failed: {exc}")
        self.port = self._server.socket.getsockname()[1]
        self._thread = threading.Thread(
            target=self._server.serve_forever, name="gateway", daemon=True
        )
        self._thread.start()
        log.info("gateway listening on ws://%s:%d", self.host, self.port)

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server = None
        if self._thread is not None:
            self._thread.join(timeout=2.0)
            self._thread = None

    @property
    def url(self) -> str:
        return f"ws://{self.host}:{self.port}"

    def _handler(self, conn: ServerConnection) -> None:
        session = _Session(self, conn)
        with self._lock:
            self.sessions.append(session)
        try:
            for raw in conn:
                session.handle_frame(raw)
        except Exception:
            pass  # connection teardown is not an error condition
        finally:
            session.close()

    def total_decode_errors(self) -> int:
        with self._lock:
            return sum(s.decode_errors for s in self.sessions)

    def total_accepted(self) -> int:
        with self._lock:
            return sum(s.accepted for s in self.sessions)
