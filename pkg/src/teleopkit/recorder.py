"""Episode recorder: 20 Hz gate, vector construction, RAM buffering.

Each recorder tick checks that every gated source (all cameras plus
robot feedback) has published within the freshness window; only then is
a frame appended.  Frames accumulate in memory for the whole episode —
nothing touches disk until finalize — so recording never competes with
an encoder for the loop's time budget.

Observations pair the robot's own report (joints, end-effector pose,
gripper) with the image frames; actions are deltas between consecutive
planner targets, i.e. operator intent rather than achieved motion, with
every rotation component wrapped to [-pi, pi).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import topics
from .bus import Envelope, MessageBus, TopicName
from .clock import Clock, s_to_ns
from .messages import (
    CameraFrame,
    GripperCommand,
    RecordControl,
    RecordStatus,
    RobotState,
    TargetPose,
)
from .posemath import Quat, Vec3, quat_to_rpy, wrap_angle

log = logging.getLogger(__name__)

OBSERVATION_DIM = 13
ACTION_DIM = 7
RECORD_HZ = 20.0
TICK_NS = s_to_ns(1.0 / RECORD_HZ)


class RecorderError(Exception):
    pass


class MemoryCeilingExceeded(RecorderError):
    """Episode aborted rather than letting buffering degrade timing."""


@dataclass(frozen=True)
class GatedSnapshot:
    """Everything one exported frame is built from, captured atomically."""

    state: RobotState
    images: dict[str, CameraFrame]
    target: Optional[TargetPose]
    gripper_closed: bool


def sync_gate(
    latest: dict[str, Optional[Envelope]],
    now_ns: int,
    freshness_window_s: float,
) -> bool:
    """True iff every source has a sample no older than the window."""
    if not latest:
        raise ValueError("sync_gate needs at least one source")
    window_ns = s_to_ns(freshness_window_s)
    for envelope in latest.values():
        if envelope is None:
            return False
        if now_ns - envelope.publish_time_ns > window_ns:
            return False
    return True


def build_observation(state: RobotState) -> np.ndarray:
    rpy = quat_to_rpy(state.ee_orientation).wrapped()
    vec = np.array(
        [
            *state.joints,
            state.ee_position.x,
            state.ee_position.y,
            state.ee_position.z,
            rpy.roll,
            rpy.pitch,
            rpy.yaw,
            1.0 if state.gripper_closed else 0.0,
        ],
        dtype=np.float32,
    )
    assert vec.shape == (OBSERVATION_DIM,)
    return vec


def build_action(
    prev_target: TargetPose, cur_target: TargetPose, gripper_closed: bool
) -> np.ndarray:
    dpos = cur_target.position - prev_target.position
    prev_rpy = quat_to_rpy(prev_target.orientation)
    cur_rpy = quat_to_rpy(cur_target.orientation)
    vec = np.array(
        [
            dpos.x,
            dpos.y,
            dpos.z,
            wrap_angle(cur_rpy.roll - prev_rpy.roll),
            wrap_angle(cur_rpy.pitch - prev_rpy.pitch),
            wrap_angle(cur_rpy.yaw - prev_rpy.yaw),
            1.0 if gripper_closed else 0.0,
        ],
        dtype=np.float32,
    )
    assert vec.shape == (ACTION_DIM,)
    return vec


@dataclass
class EpisodeFrame:
    frame_index: int
    timestamp_s: float
    observation: np.ndarray
    action: np.ndarray
    images: dict[str, np.ndarray]

    def nbytes(self) -> int:
        return (
            self.observation.nbytes
            + self.action.nbytes
            + sum(img.nbytes for img in self.images.values())
        )


@dataclass
class EpisodeBuffer:
    task: str
    started_ns: int
    frames: list[EpisodeFrame] = field(default_factory=list)
    skipped_ticks: int = 0
    bytes_buffered: int = 0
    failed_reason: Optional[str] = None
    finalized: bool = False


@dataclass(frozen=True)
class RecorderConfig:
    freshness_window_s: float = 0.050
    memory_ceiling_bytes: int = 512 * 1024 * 1024
    default_task: str = "teleop demonstration"


class EpisodeRecorder:
    """Owns the record loop state for one namespace.

    ``tick`` is called by the scheduler at exactly 20 Hz; control
    arrives either via the bus record_ctl topic or direct start/stop
    calls.  Finished episodes are handed to a dataset writer supplied by
    the caller (see the dataset module).
    """

    def __init__(
        self,
        bus: MessageBus,
        clock: Clock,
        camera_topics: Sequence[str],
        namespace: str = "",
        config: RecorderConfig = RecorderConfig(),
    ):
        if not camera_topics:
            raise ValueError("recorder needs at least one camera topic")
        self.bus = bus
        self.clock = clock
        self.config = config
        self.namespace = namespace
        self.camera_topics = list(camera_topics)
        self.feedback_topic = topics.namespaced(namespace, topics.ROBOT_FEEDBACK)
        self.target_topic = topics.namespaced(namespace, topics.TARGET_POSE)
        self.gripper_topic = topics.namespaced(namespace, topics.GRIPPER_CMD)
        self.status_topic = topics.namespaced(namespace, topics.RECORD_STATUS)
        self._ctl_sub = bus.subscribe(
            topics.namespaced(namespace, topics.RECORD_CTL), exclusive=True
        )
        self.episode: Optional[EpisodeBuffer] = None
        self.completed: list[EpisodeBuffer] = []
        self.episodes_finished = 0
        self._prev_target: Optional[TargetPose] = None

    # ---- control -------------------------------------------------------

    def start(self, task: str = "") -> None:
        if self.episode is not None:
            log.warning("start ignored: episode already recording")
            return
        self.episode = EpisodeBuffer(
            task=task or self.config.default_task,
            started_ns=self.clock.now_ns(),
        )
        self._prev_target = None
        self._publish_status()

    def stop(self) -> Optional[EpisodeBuffer]:
        """End the episode and queue it for export."""
        if self.episode is None:
            log.warning("stop ignored: not recording")
            return None
        done = self.episode
        self.episode = None
        self.completed.append(done)
        self.episodes_finished += 1
        self._publish_status()
        return done

    def discard(self) -> None:
        if self.episode is not None:
            self.episode = None
            self._publish_status()

    @property
    def recording(self) -> bool:
        return self.episode is not None

    # ---- the 20 Hz loop body --------------------------------------------

    def tick(self, now_ns: int) -> None:
        for envelope in self._ctl_sub.drain():
            ctl: RecordControl = envelope.payload
            if ctl.action == "start":
                self.start(ctl.task)
            elif ctl.action == "stop":
                self.stop()
            else:
                self.discard()

        if self.episode is None:
            return

        snapshot = self._gate(now_ns)
        if snapshot is None:
            self.episode.skipped_ticks += 1
            return

        # Action basis: consecutive planner targets. Before the first
        # target exists (clutch never released) the commanded pose is
        # wherever the robot already is, so deltas are zero.
        cur_target = snapshot.target or TargetPose(
            position=snapshot.state.ee_position,
            orientation=snapshot.state.ee_orientation,
            stamp_ns=snapshot.state.stamp_ns,
        )
        prev_target = self._prev_target or cur_target
        action = build_action(prev_target, cur_target, snapshot.gripper_closed)
        self._prev_target = cur_target

        frame = EpisodeFrame(
            frame_index=len(self.episode.frames),
            timestamp_s=(now_ns - self.episode.started_ns) / 1e9,
            observation=build_observation(snapshot.state),
            action=action,
            images={name: f.pixels for name, f in snapshot.images.items()},
        )
        self.episode.bytes_buffered += frame.nbytes()
        if self.episode.bytes_buffered > self.config.memory_ceiling_bytes:
            reason = (
                f"memory ceiling exceeded: {self.episode.bytes_buffered} B buffered "
                f"> {self.config.memory_ceiling_bytes} B after "
                f"{len(self.episode.frames)} frames"
            )
            self.episode = None
            self._publish_status()
            raise MemoryCeilingExceeded(reason)
        self.episode.frames.append(frame)
        self._publish_status()

    def _gate(self, now_ns: int) -> Optional[GatedSnapshot]:
        gated: dict[str, Optional[Envelope]] = {
            topic: self.bus.latest(topic) for topic in self.camera_topics
        }
        gated["feedback"] = self.bus.latest(self.feedback_topic)
        if not sync_gate(gated, now_ns, self.config.freshness_window_s):
            return None

        images: dict[str, CameraFrame] = {}
        for topic in self.camera_topics:
            frame: CameraFrame = gated[topic].payload
            images[frame.source] = frame
        state: RobotState = gated["feedback"].payload

        target_env = self.bus.latest(self.target_topic)
        gripper_env = self.bus.latest(self.gripper_topic)
        return GatedSnapshot(
            state=state,
            images=images,
            target=target_env.payload if target_env else None,
            gripper_closed=gripper_env.payload.closed if gripper_env else state.gripper_closed,
        )

    def _publish_status(self) -> None:
        self.bus.publish(
            self.status_topic,
            RecordStatus(
                recording=self.episode is not None,
                frames=len(self.episode.frames) if self.episode else 0,
                episodes=self.episodes_finished,
                stamp_ns=self.clock.now_ns(),
            ),
        )
