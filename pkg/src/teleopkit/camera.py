"""Frame sources feeding the recorder's synchronization gate.

Real deployments point webcams at the scene; here the "camera" is either
a deterministic rasterization of the simulated arm (so pixel content
tracks robot state and can be sanity-checked end to end) or a directory
of images replayed from disk.  Both publish ``CameraFrame`` payloads on
the bus; the recorder only ever sees the bus topic.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import topics
from .bus import MessageBus, TopicName
from .messages import CameraFrame, RobotState
from .planner import WorkspaceBounds


@dataclass(frozen=True)
class CameraConfig:
    name: str = "cam_front"
    width: int = 160
    height: int = 120
    seed: int = 0


def _seeded_background(config: CameraConfig) -> np.ndarray:
    """Static low-amplitude noise floor; same seed -> same pixels."""
    rng = np.random.default_rng(config.seed)
    return rng.integers(20, 60, size=(config.height, config.width, 3), dtype=np.uint8)


class SyntheticCamera:
    """Top-down render of the workspace with the end effector marked.

    The workspace rectangle maps onto the full canvas (x right, y down),
    the end effector is a filled square whose size tracks height above
    the workspace floor, and its color flips with gripper state.  Every
    pixel is a pure function of (seed, robot state), which is what makes
    golden-run datasets byte-reproducible.
    """

    def __init__(
        self,
        bus: MessageBus,
        config: CameraConfig,
        workspace: WorkspaceBounds,
        namespace: str = "",
    ):
        self.bus = bus
        self.config = config
        self.workspace = workspace
        self.topic = TopicName(namespace=namespace, base=topics.camera(config.name)).full
        self._background = _seeded_background(config)
        self._frozen = False
        self._frames_published = 0
        bus.advertise(self.topic, CameraFrame)

    def freeze(self) -> None:
        """Stop publishing; the recorder gate will see a stale source."""
        self._frozen = True

    def unfreeze(self) -> None:
        self._frozen = False

    @property
    def frames_published(self) -> int:
        return self._frames_published

    def render(self, state: RobotState) -> np.ndarray:
        ws = self.workspace
        w, h = self.config.width, self.config.height
        img = self._background.copy()

        # workspace border
        img[0, :] = img[-1, :] = img[:, 0] = img[:, -1] = (90, 90, 90)

        def to_px(x: float, y: float) -> tuple[int, int]:
            u = (x - ws.x[0]) / (ws.x[1] - ws.x[0])
            v = (y - ws.y[0]) / (ws.y[1] - ws.y[0])
            col = int(round(np.clip(u, 0.0, 1.0) * (w - 1)))
            row = int(round(np.clip(v, 0.0, 1.0) * (h - 1)))
            return row, col

        row, col = to_px(state.ee_position.x, state.ee_position.y)
        z_frac = (state.ee_position.z - ws.z[0]) / (ws.z[1] - ws.z[0])
        half = 2 + int(round(np.clip(z_frac, 0.0, 1.0) * 6))
        color = (220, 60, 60) if state.gripper_closed else (60, 220, 60)
        r0, r1 = max(0, row - half), min(h, row + half + 1)
        c0, c1 = max(0, col - half), min(w, col + half + 1)
        img[r0:r1, c0:c1] = color

        # joint readout strip along the bottom: one column block per joint
        strip = h - 6
        for j, q in enumerate(state.joints):
            level = int((np.clip(q, -np.pi, np.pi) / np.pi + 1.0) * 127.5)
            img[strip:, j * 8 : j * 8 + 6] = (level, level, 255 - level)
        return img

    def tick(self, state: RobotState, now_ns: int) -> Optional[CameraFrame]:
        if self._frozen:
            return None
        frame = CameraFrame(source=self.config.name, pixels=self.render(state), stamp_ns=now_ns)
        self.bus.publish(self.topic, frame)
        self._frames_published += 1
        return frame


class ImageSequenceSource:
    """Replays image files from a directory in sorted-name order.

    When the sequence runs out the last frame is held, so the source
    stays fresh instead of silently stalling the recorder gate.
    """

    def __init__(
        self,
        bus: MessageBus,
        name: str,
        directory: str | Path,
        namespace: str = "",
    ):
        import cv2

        self.bus = bus
        self.name = name
        self.topic = TopicName(namespace=namespace, base=topics.camera(name)).full
        self._paths = sorted(
            p for p in Path(directory).iterdir() if p.suffix.lower() in (".png", ".jpg", ".bmp")
        )
        if not self._paths:
            raise FileNotFoundError(f"no image files under {directory}")
        self._frames = []
        for p in self._paths:
            bgr = cv2.imread(str(p), cv2.IMREAD_COLOR)
            if bgr is None:
                raise ValueError(f"unreadable image file {p}")
            self._frames.append(bgr[:, :, ::-1].copy())  # store RGB
        shapes = {f.shape for f in self._frames}
        if len(shapes) != 1:
            raise ValueError(f"mixed frame shapes in sequence: {shapes}")
        self._cursor = 0
        bus.advertise(self.topic, CameraFrame)

    def tick(self, state: RobotState, now_ns: int) -> CameraFrame:
        pixels = self._frames[min(self._cursor, len(self._frames) - 1)]
        self._cursor += 1
        frame = CameraFrame(source=self.name, pixels=pixels, stamp_ns=now_ns)
        self.bus.publish(self.topic, frame)
        return frame


def frame_digest(pixels: np.ndarray) -> str:
    """Stable content hash used by determinism tests and golden checks."""
    return hashlib.sha256(np.ascontiguousarray(pixels).tobytes()).hexdigest()
