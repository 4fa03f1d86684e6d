"""System assembly: one gateway + per-namespace arm stacks on one bus.

An ArmUnit is the full chain for a single namespace — planner, robot
bridge, simulated arm (in-process or behind a loopback TCP wire),
cameras, recorder, dataset writer.  The Pipeline builds one unit per
``[[arm]]`` profile table and drives them all from a single scheduler,
so a bimanual system is literally two identical units with different
topic prefixes.

Task ordering within a scheduler instant (priority): planner, bridge
pump, camera render, recorder gate, episode export.  That fixed order on
a virtual clock is what makes recorded datasets reproducible.
"""

from __future__ import annotations

import dataclasses
import logging
import threading
from pathlib import Path
from typing import Optional

from . import topics
from .bridge import BridgeEndpoint, InProcessEndpoint, RobotBridge, TcpEndpoint
from .bus import MessageBus
from .camera import SyntheticCamera
from .clock import Clock, VirtualClock, WallClock
from .config import ArmProfile, LaunchProfile
from .dataset import DatasetError, DatasetWriter, Storage
from .gateway import PhoneGateway
from .messages import RobotState
from .planner import PlannerNode
from .recorder import EpisodeRecorder, RECORD_HZ
from .scheduler import Scheduler
from .simarm import SimArm
from .wire import MockWireServer

log = logging.getLogger(__name__)

# scheduler tie-break priorities: input processing before actuation
# before observation before recording before export
PRIO_PLANNER = 10
PRIO_BRIDGE = 20
PRIO_CAMERA = 40
PRIO_RECORDER = 50
PRIO_EXPORT = 60

DEFAULT_PLANNER_HZ = 200.0


class ArmUnit:
    """Everything for one namespace, wired to the shared bus."""

    def __init__(
        self,
        bus: MessageBus,
        clock: Clock,
        scheduler: Scheduler,
        arm_profile: ArmProfile,
        output_root: Path,
        video_mode: str,
        task: str,
        planner_hz: float = DEFAULT_PLANNER_HZ,
        storage: Optional[Storage] = None,
    ):
        self.bus = bus
        self.clock = clock
        self.profile = arm_profile
        ns = arm_profile.namespace

        self.mock_server: Optional[MockWireServer] = None
        self.sim: Optional[SimArm] = None
        if arm_profile.endpoint == "inproc":
            self.sim = SimArm(arm_profile.sim, start_ns=clock.now_ns())
            endpoint: BridgeEndpoint = InProcessEndpoint(self.sim, clock)
        else:
            self.mock_server = MockWireServer(
                config=arm_profile.sim,
                host=arm_profile.tcp_host,
                port=arm_profile.tcp_port,
                clock=clock,
            )
            self.mock_server.start()
            endpoint = TcpEndpoint(arm_profile.tcp_host, self.mock_server.port)

        self.planner_node = PlannerNode(bus, ns, arm_profile.planner, clock)
        self.bridge = RobotBridge(bus, ns, endpoint, clock)
        self.cameras = [
            SyntheticCamera(bus, cam, arm_profile.planner.workspace, namespace=ns)
            for cam in arm_profile.cameras
        ]
        camera_topics = [cam.topic for cam in self.cameras]
        self.recorder = EpisodeRecorder(
            bus,
            clock,
            camera_topics=camera_topics,
            namespace=ns,
            config=dataclasses.replace(arm_profile.recorder, default_task=task),
        )
        self.writer = DatasetWriter(
            root=output_root,
            video_mode=video_mode,
            storage=storage or Storage(),
        )
        self.default_task = task
        self.export_errors: list[str] = []

        self._feedback_topic = topics.namespaced(ns, topics.ROBOT_FEEDBACK)
        label = ns or "single"
        scheduler.every(f"planner{label}", 1.0 / planner_hz, self._tick_planner, PRIO_PLANNER)
        scheduler.every(
            f"bridge{label}", 1.0 / arm_profile.sim.feedback_rate, self._tick_bridge, PRIO_BRIDGE
        )
        scheduler.every(f"camera{label}", 1.0 / RECORD_HZ, self._tick_cameras, PRIO_CAMERA)
        scheduler.every(f"recorder{label}", 1.0 / RECORD_HZ, self._tick_recorder, PRIO_RECORDER)
        scheduler.every(f"export{label}", 1.0 / RECORD_HZ, self._tick_export, PRIO_EXPORT)

    def connect(self) -> None:
        self.bridge.connect()

    def close(self) -> None:
        self._tick_export(self.clock.now_ns())
        self.bridge.close()
        if self.mock_server is not None:
            self.mock_server.stop()

    # ---- scheduler callbacks ------------------------------------------

    def _tick_planner(self, now_ns: int) -> None:
        self.planner_node.step()

    def _tick_bridge(self, now_ns: int) -> None:
        self.bridge.drain_commands()
        self.bridge.publish_feedback()

    def _tick_cameras(self, now_ns: int) -> None:
        env = self.bus.latest(self._feedback_topic)
        if env is None:
            return
        state: RobotState = env.payload
        for cam in self.cameras:
            cam.tick(state, now_ns)

    def _tick_recorder(self, now_ns: int) -> None:
        self.recorder.tick(now_ns)

    def _tick_export(self, now_ns: int) -> None:
        while self.recorder.completed:
            episode = self.recorder.completed.pop(0)
            if not episode.task:
                episode.task = self.default_task
            try:
                self.writer.write_episode(episode)
            except DatasetError as exc:
                self.export_errors.append(str(exc))
                log.warning("[recorder%s] export failed: %s", self.profile.namespace, exc)


def output_root_for(root: str | Path, namespace: str) -> Path:
    root = Path(root)
    return root if namespace == "" else root / namespace.strip("/")


class Pipeline:
    """Owns lifecycle for the whole system described by a LaunchProfile."""

    def __init__(
        self,
        profile: LaunchProfile,
        clock: Optional[Clock] = None,
        enable_gateway: bool = True,
        planner_hz: float = DEFAULT_PLANNER_HZ,
        gateway_port: Optional[int] = None,
        storage_factory=Storage,
    ):
        self.profile = profile
        self.clock = clock or (
            VirtualClock() if profile.clock == "virtual" else WallClock()
        )
        self.bus = MessageBus(self.clock)
        self.scheduler = Scheduler(self.clock)
        self.stop_event = threading.Event()
        self.units = [
            ArmUnit(
                self.bus,
                self.clock,
                self.scheduler,
                arm,
                output_root=output_root_for(profile.output_root, arm.namespace),
                video_mode=profile.video_mode,
                task=profile.task,
                planner_hz=planner_hz,
                storage=storage_factory(),
            )
            for arm in profile.arms
        ]
        self.gateway: Optional[PhoneGateway] = None
        if enable_gateway:
            self.gateway = PhoneGateway(
                self.bus,
                self.clock,
                host=profile.gateway_host,
                port=gateway_port if gateway_port is not None else profile.gateway_port,
                nominal_rate_hz=profile.nominal_rate_hz,
            )
        self._started = False

    # ---- lifecycle -----------------------------------------------------

    def start(self) -> None:
        if self._started:
            return
        if self.gateway is not None:
            self.gateway.start()
        for unit in self.units:
            unit.connect()
        self._started = True

    def run_for(self, duration_s: float) -> int:
        """Drive all scheduled tasks for a stretch of (clock) time."""
        return self.scheduler.run_for(duration_s, stop=self.stop_event)

    def run_until_ns(self, t_ns: int) -> int:
        return self.scheduler.run_until(t_ns, stop=self.stop_event)

    def shutdown(self) -> None:
        self.stop_event.set()
        for unit in self.units:
            unit.close()
        if self.gateway is not None:
            self.gateway.stop()
        self._started = False

    def __enter__(self) -> "Pipeline":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.shutdown()

    # ---- conveniences ----------------------------------------------------

    def unit(self, namespace: str = "") -> ArmUnit:
        for u in self.units:
            if u.profile.namespace == namespace:
                return u
        raise KeyError(f"no arm unit for namespace {namespace!r}")

    @property
    def gateway_url(self) -> str:
        if self.gateway is None:
            raise RuntimeError("gateway disabled")
        return self.gateway.url
