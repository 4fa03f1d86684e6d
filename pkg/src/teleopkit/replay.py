"""Scripted operator: deterministic replays through the real wire path.

A replay script is JSONL, one event per line, each with a time offset in
seconds from replay start:

    {"t": 0.00, "event": "pose", "pos": [0, 0, 0]}
    {"t": 0.02, "event": "pose", "pos": [0, 0, 0], "rpy": [0, 0, 0.1]}
    {"t": 0.20, "event": "button", "button": "volume_up"}
    {"t": 0.30, "event": "record", "action": "start", "task": "pick cube"}

Events are sent through an actual WebSocket connection to the gateway —
the same code path a phone exercises — while the driver advances the
pipeline clock in lockstep: run the scheduler up to the event time, send
the frame, wait for the gateway to republish it on the bus, repeat.  On
a virtual clock this yields bit-reproducible runs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterator, Optional

from websockets.sync.client import connect

from . import topics
from .clock import s_to_ns
from .pipeline import Pipeline
from .posemath import rpy_to_quat, Rpy

POSE_EVENT = "pose"
BUTTON_EVENT = "button"
RECORD_EVENT = "record"


class ScriptError(Exception):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"script line {line_no}: {reason}")
        self.line_no = line_no


@dataclass(frozen=True)
class ScriptEvent:
    t: float
    event: str
    pos: Optional[tuple[float, float, float]] = None
    rpy: Optional[tuple[float, float, float]] = None
    button: Optional[str] = None
    action: Optional[str] = None
    task: str = ""


def parse_script(text: str) -> list[ScriptEvent]:
    events: list[ScriptEvent] = []
    last_t = -math.inf
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ScriptError(line_no, f"bad JSON: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise ScriptError(line_no, "event must be a JSON object")
        t = obj.get("t")
        if not isinstance(t, (int, float)) or not math.isfinite(t) or t < 0:
            raise ScriptError(line_no, f"bad time offset {t!r}")
        if t < last_t:
            raise ScriptError(line_no, f"events not time-ordered: {t} after {last_t}")
        last_t = t
        kind = obj.get("event")
        try:
            if kind == POSE_EVENT:
                pos = obj.get("pos")
                if not isinstance(pos, list) or len(pos) != 3:
                    raise ValueError(f"pose needs pos [x,y,z], got {pos!r}")
                rpy = obj.get("rpy", [0.0, 0.0, 0.0])
                if not isinstance(rpy, list) or len(rpy) != 3:
                    raise ValueError(f"rpy must be [r,p,y], got {rpy!r}")
                events.append(
                    ScriptEvent(
                        t=float(t),
                        event=kind,
                        pos=tuple(float(v) for v in pos),
                        rpy=tuple(float(v) for v in rpy),
                    )
                )
            elif kind == BUTTON_EVENT:
                button = obj.get("button")
                if button not in ("volume_up", "volume_down"):
                    raise ValueError(f"unknown button {button!r}")
                events.append(ScriptEvent(t=float(t), event=kind, button=button))
            elif kind == RECORD_EVENT:
                action = obj.get("action")
                if action not in ("start", "stop", "discard"):
                    raise ValueError(f"unknown record action {action!r}")
                events.append(
                    ScriptEvent(
                        t=float(t), event=kind, action=action, task=obj.get("task", "")
                    )
                )
            else:
                raise ValueError(f"unknown event kind {kind!r}")
        except ValueError as exc:
            raise ScriptError(line_no, str(exc)) from None
    return events


@dataclass
class ReplayResult:
    events_sent: int = 0
    poses_sent: int = 0
    errors: list[str] = None

    def __post_init__(self):
        if self.errors is None:
            self.errors = []


class ReplayDriver:
    """Feeds one script into one namespace over a live gateway socket."""

    def __init__(self, pipeline: Pipeline, namespace: str = "", tail_s: float = 0.5):
        self.pipeline = pipeline
        self.namespace = namespace
        self.tail_s = tail_s
        self.pose_topic = topics.namespaced(namespace, topics.PHONE_POSE)
        self.button_topic = topics.namespaced(namespace, topics.BUTTON)
        self.record_topic = topics.namespaced(namespace, topics.RECORD_CTL)

    def run(self, events: list[ScriptEvent]) -> ReplayResult:
        result = ReplayResult()
        bus = self.pipeline.bus
        start_ns = self.pipeline.clock.now_ns()
        with connect(self.pipeline.gateway_url, close_timeout=1.0) as ws:
            for topic in (self.pose_topic, self.button_topic, self.record_topic):
                ws.send(json.dumps({"op": "advertise", "topic": "/" + topic if not topic.startswith("/") else topic}))
            for event in events:
                event_ns = start_ns + s_to_ns(event.t)
                if event_ns > self.pipeline.clock.now_ns():
                    self.pipeline.run_until_ns(event_ns)
                frame, topic = self._frame_for(event)
                expected = bus.sequence(topic) + 1
                ws.send(json.dumps(frame))
                if not bus.wait_for_publish(topic, expected, timeout_s=5.0):
                    result.errors.append(
                        f"gateway did not republish {topic} event at t={event.t}"
                    )
                    continue
                result.events_sent += 1
                if event.event == POSE_EVENT:
                    result.poses_sent += 1
            self.pipeline.run_for(self.tail_s)
        return result

    def _frame_for(self, event: ScriptEvent) -> tuple[dict, str]:
        if event.event == POSE_EVENT:
            quat = rpy_to_quat(Rpy(*event.rpy))
            msg = {
                "header": {"stamp": event.t * 1000.0},
                "pose": {
                    "position": {
                        "x": event.pos[0],
                        "y": event.pos[1],
                        "z": event.pos[2],
                    },
                    "orientation": {"w": quat.w, "x": quat.x, "y": quat.y, "z": quat.z},
                },
            }
            topic = self.pose_topic
        elif event.event == BUTTON_EVENT:
            msg = {"button": event.button, "stamp": event.t * 1000.0}
            topic = self.button_topic
        else:
            msg = {"action": event.action, "task": event.task}
            topic = self.record_topic
        wire_topic = "/" + topic if not topic.startswith("/") else topic
        return {"op": "publish", "topic": wire_topic, "msg": msg}, topic


def _interp(a: float, b: float, u: float) -> float:
    return a + (b - a) * u


def _waypoint_pose(t: float, waypoints: list[tuple[float, tuple[float, float, float]]]):
    """Piecewise-linear phone position along (time, xyz) waypoints."""
    if t <= waypoints[0][0]:
        return waypoints[0][1]
    for (t0, p0), (t1, p1) in zip(waypoints, waypoints[1:]):
        if t0 <= t <= t1:
            u = (t - t0) / (t1 - t0) if t1 > t0 else 1.0
            return tuple(_interp(a, b, u) for a, b in zip(p0, p1))
    return waypoints[-1][1]


def build_pick_place_script(rate_hz: float = 50.0, task: str = "pick and place") -> str:
    """Canned demonstration: reach, descend, grasp, lift, move, release.

    Phone-frame displacements in meters; with the identity axis map and
    the default home pose the whole motion stays inside the default
    workspace.  Pure function of its arguments, so replays are
    reproducible.
    """
    waypoints = [
        (0.00, (0.0, 0.0, 0.0)),
        (0.40, (0.0, 0.0, 0.0)),  # hold while clutch releases / recording starts
        (1.00, (0.10, 0.0, 0.0)),  # reach forward
        (1.60, (0.10, 0.0, -0.18)),  # descend to the object
        (1.90, (0.10, 0.0, -0.18)),  # dwell for the grasp
        (2.50, (0.10, 0.0, 0.02)),  # lift
        (3.20, (0.10, 0.22, 0.02)),  # carry sideways
        (3.60, (0.10, 0.22, -0.12)),  # lower
        (3.90, (0.10, 0.22, -0.12)),  # dwell for the release
        (4.40, (0.05, 0.10, 0.05)),  # retreat
    ]
    total = waypoints[-1][0]
    lines: list[str] = []

    def emit(obj: dict) -> None:
        lines.append(json.dumps(obj, sort_keys=True))

    dt = 1.0 / rate_hz
    n = int(round(total / dt)) + 1
    button_events = [
        (0.20, "volume_up"),  # release clutch
        (1.90, "volume_down"),  # close gripper at the object
        (3.90, "volume_down"),  # open gripper at the drop point
    ]
    record_events = [(0.30, "start"), (total, "stop")]

    cursor_button = 0
    cursor_record = 0
    for i in range(n):
        t = round(i * dt, 6)
        while cursor_button < len(button_events) and button_events[cursor_button][0] <= t:
            bt, name = button_events[cursor_button]
            emit({"t": bt, "event": "button", "button": name})
            cursor_button += 1
        while cursor_record < len(record_events) and record_events[cursor_record][0] <= t:
            rt, action = record_events[cursor_record]
            emit({"t": rt, "event": "record", "action": action, "task": task})
            cursor_record += 1
        pos = _waypoint_pose(t, waypoints)
        yaw = 0.15 * math.sin(2 * math.pi * t / total)
        emit({"t": t, "event": "pose", "pos": list(pos), "rpy": [0.0, 0.0, round(yaw, 9)]})
    for bt, name in button_events[cursor_button:]:
        emit({"t": bt, "event": "button", "button": name})
    for rt, action in record_events[cursor_record:]:
        emit({"t": rt, "event": "record", "action": action, "task": task})
    return "\n".join(lines) + "\n"


def build_hold_script(duration_s: float = 2.0, rate_hz: float = 50.0) -> str:
    """Clutch stays engaged throughout: streams poses, never releases."""
    lines = [
        json.dumps({"t": 0.0, "event": "record", "action": "start", "task": "idle hold"})
    ]
    n = int(round(duration_s * rate_hz)) + 1
    for i in range(n):
        t = round(i / rate_hz, 6)
        lines.append(json.dumps({"t": t, "event": "pose", "pos": [0.0, 0.0, 0.0]}))
    lines.append(json.dumps({"t": duration_s, "event": "record", "action": "stop"}))
    return "\n".join(lines) + "\n"
