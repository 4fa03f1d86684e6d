"""LeRobot-layout dataset export.

Output tree (v2-style, directly loadable by common VLA training stacks):

    root/meta/info.json
    root/meta/episodes.jsonl
    root/meta/tasks.jsonl
    root/data/chunk-000/episode_{NNNNNN}.parquet
    root/videos/chunk-000/observation.images.{source}/episode_{NNNNNN}.mp4

Parquet columns: timestamp (f64 seconds), frame_index (u32),
episode_index (u32), index (u64 global), task_index (u32),
observation.state (FixedSizeList<f32, 13>), action (FixedSizeList<f32, 7>).

Every byte that reaches disk flows through the Storage object, which
timestamps each call; tests use that log to prove episodes are buffered
in RAM until finalize.  Episodes are staged in a scratch directory and
renamed into place so a crash can never leave a half-written episode in
the manifest; on write failure the staged files are preserved in a
recovery spool instead.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import pyarrow as pa
import pyarrow.parquet as pq

from .recorder import ACTION_DIM, OBSERVATION_DIM, EpisodeBuffer, RECORD_HZ

log = logging.getLogger(__name__)

CHUNK = "chunk-000"
CODEC_VERSION = "v2.0"

STATE_FIELD = pa.field("observation.state", pa.list_(pa.float32(), OBSERVATION_DIM))
ACTION_FIELD = pa.field("action", pa.list_(pa.float32(), ACTION_DIM))

PARQUET_SCHEMA = pa.schema(
    [
        pa.field("timestamp", pa.float64()),
        pa.field("frame_index", pa.uint32()),
        pa.field("episode_index", pa.uint32()),
        pa.field("index", pa.uint64()),
        pa.field("task_index", pa.uint32()),
        STATE_FIELD,
        ACTION_FIELD,
    ]
)


class DatasetError(Exception):
    pass


class Storage:
    """Single funnel for disk writes, with a timestamped call log."""

    def __init__(self, time_source: Callable[[], int] = time.monotonic_ns):
        self._now = time_source
        self.calls: list[tuple[str, str, int]] = []

    def _log(self, op: str, path: Path) -> None:
        self.calls.append((op, str(path), self._now()))

    def mkdir(self, path: Path) -> None:
        self._log("mkdir", path)
        path.mkdir(parents=True, exist_ok=True)

    def write_bytes(self, path: Path, data: bytes) -> None:
        self._log("write_bytes", path)
        path.write_bytes(data)

    def write_text(self, path: Path, text: str) -> None:
        self._log("write_text", path)
        path.write_text(text)

    def rename(self, src: Path, dst: Path) -> None:
        self._log("rename", src)
        src.rename(dst)

    def remove_tree(self, path: Path) -> None:
        self._log("remove_tree", path)
        import shutil

        shutil.rmtree(path, ignore_errors=True)

    def open_video_writer(self, path: Path, fps: float, width: int, height: int):
        import cv2

        self._log("open_video", path)
        writer = cv2.VideoWriter(
            str(path), cv2.VideoWriter_fourcc(*"mp4v"), fps, (width, height)
        )
        if not writer.isOpened():
            raise DatasetError(f"video encoder unavailable for {path}")
        return writer


def _json_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


@dataclass
class DatasetWriter:
    """Appends finished episodes to a dataset root, one at a time."""

    root: Path
    fps: float = RECORD_HZ
    video_mode: str = "mp4"  # "mp4" | "images"
    robot_type: str = "sim_arm_6dof"
    storage: Storage = field(default_factory=Storage)

    def __post_init__(self):
        self.root = Path(self.root)
        if self.video_mode not in ("mp4", "images"):
            raise ValueError(f"unknown video mode {self.video_mode!r}")
        self._episodes: list[dict] = []
        self._tasks: list[str] = []
        self._total_frames = 0
        self._video_shapes: dict[str, tuple[int, int, int]] = {}
        self._load_existing()

    def _load_existing(self) -> None:
        info_path = self.root / "meta" / "info.json"
        if not info_path.exists():
            return
        info = json.loads(info_path.read_text())
        self._total_frames = info.get("total_frames", 0)
        episodes_path = self.root / "meta" / "episodes.jsonl"
        if episodes_path.exists():
            with episodes_path.open() as fh:
                self._episodes = [json.loads(line) for line in fh if line.strip()]
        tasks_path = self.root / "meta" / "tasks.jsonl"
        if tasks_path.exists():
            with tasks_path.open() as fh:
                self._tasks = [json.loads(line)["task"] for line in fh if line.strip()]

    # ---- public API ------------------------------------------------------

    @property
    def episode_count(self) -> int:
        return len(self._episodes)

    def write_episode(self, episode: EpisodeBuffer) -> int:
        """Export one finished episode; returns its index. All-or-nothing."""
        if episode.finalized:
            raise DatasetError("episode already finalized")
        if not episode.frames:
            raise DatasetError("empty episode: nothing to export")

        episode_index = len(self._episodes)
        task_index = self._task_index(episode.task)
        staging = self.root / f".staging-{episode_index:06d}"
        self.storage.mkdir(staging)

        try:
            artifacts = self._stage(episode, episode_index, task_index, staging)
        except Exception as exc:
            spool = self.root / ".recovery" / f"episode_{episode_index:06d}"
            self.storage.mkdir(spool.parent)
            try:
                self.storage.rename(staging, spool)
            except OSError:
                pass
            raise DatasetError(f"episode export failed, staged files in {spool}: {exc}")

        for src, dst in artifacts:
            self.storage.mkdir(dst.parent)
            self.storage.rename(src, dst)
        self.storage.remove_tree(staging)

        self._episodes.append(
            {
                "episode_index": episode_index,
                "tasks": [episode.task],
                "length": len(episode.frames),
            }
        )
        self._total_frames += len(episode.frames)
        self._write_meta()
        episode.finalized = True
        return episode_index

    # ---- internals ---------------------------------------------------------

    def _task_index(self, task: str) -> int:
        if task not in self._tasks:
            self._tasks.append(task)
        return self._tasks.index(task)

    def _stage(
        self,
        episode: EpisodeBuffer,
        episode_index: int,
        task_index: int,
        staging: Path,
    ) -> list[tuple[Path, Path]]:
        """Build every artifact under staging; return (staged, final) moves."""
        moves: list[tuple[Path, Path]] = []

        parquet_name = f"episode_{episode_index:06d}.parquet"
        staged_parquet = staging / parquet_name
        self.storage.write_bytes(
            staged_parquet,
            _episode_table_bytes(episode, episode_index, task_index, self._total_frames),
        )
        moves.append((staged_parquet, self.root / "data" / CHUNK / parquet_name))

        sources = sorted(episode.frames[0].images)
        for source in sources:
            shape = episode.frames[0].images[source].shape
            known = self._video_shapes.setdefault(source, shape)
            if known != shape:
                raise DatasetError(
                    f"camera {source!r} resolution changed: {known} -> {shape}"
                )
            video_dir = Path("videos") / CHUNK / f"observation.images.{source}"
            if self.video_mode == "mp4":
                name = f"episode_{episode_index:06d}.mp4"
                staged = staging / source / name
                self.storage.mkdir(staged.parent)
                self._encode_mp4(episode, source, staged)
                moves.append((staged, self.root / video_dir / name))
            else:
                name = f"episode_{episode_index:06d}"
                staged = staging / source / name
                self.storage.mkdir(staged)
                self._encode_pngs(episode, source, staged)
                moves.append((staged, self.root / video_dir / name))
        return moves

    def _encode_mp4(self, episode: EpisodeBuffer, source: str, path: Path) -> None:
        import cv2

        h, w, _ = episode.frames[0].images[source].shape
        writer = self.storage.open_video_writer(path, self.fps, w, h)
        try:
            for frame in episode.frames:
                writer.write(frame.images[source][:, :, ::-1])  # RGB -> BGR
        finally:
            writer.release()

    def _encode_pngs(self, episode: EpisodeBuffer, source: str, directory: Path) -> None:
        import cv2

        for frame in episode.frames:
            ok, buf = cv2.imencode(".png", frame.images[source][:, :, ::-1])
            if not ok:
                raise DatasetError(f"PNG encode failed for {source}")
            self.storage.write_bytes(
                directory / f"frame_{frame.frame_index:06d}.png", buf.tobytes()
            )

    def _write_meta(self) -> None:
        meta = self.root / "meta"
        self.storage.mkdir(meta)
        features: dict = {
            "observation.state": {"dtype": "float32", "shape": [OBSERVATION_DIM]},
            "action": {"dtype": "float32", "shape": [ACTION_DIM]},
        }
        for source, (h, w, c) in sorted(self._video_shapes.items()):
            features[f"observation.images.{source}"] = {
                "dtype": "video" if self.video_mode == "mp4" else "image",
                "shape": [h, w, c],
                "info": {"video.fps": self.fps} if self.video_mode == "mp4" else {},
            }
        info = {
            "codebase_version": CODEC_VERSION,
            "robot_type": self.robot_type,
            "fps": self.fps,
            "video_mode": self.video_mode,
            "total_episodes": len(self._episodes),
            "total_frames": self._total_frames,
            "total_tasks": len(self._tasks),
            "chunks_size": 1000,
            "total_chunks": 1,
            "data_path": "data/chunk-000/episode_{episode_index:06d}.parquet",
            "video_path": "videos/chunk-000/observation.images.{video_key}/episode_{episode_index:06d}"
            + (".mp4" if self.video_mode == "mp4" else ""),
            "features": features,
            "splits": {"train": f"0:{len(self._episodes)}"},
        }
        self.storage.write_text(meta / "info.json", _json_dumps(info))
        self.storage.write_text(
            meta / "episodes.jsonl", "".join(_json_dumps(e) for e in self._episodes)
        )
        self.storage.write_text(
            meta / "tasks.jsonl",
            "".join(
                _json_dumps({"task_index": i, "task": t})
                for i, t in enumerate(self._tasks)
            ),
        )


def _episode_table_bytes(
    episode: EpisodeBuffer, episode_index: int, task_index: int, global_base: int
) -> bytes:
    n = len(episode.frames)
    state = np.stack([f.observation for f in episode.frames]).astype(np.float32)
    action = np.stack([f.action for f in episode.frames]).astype(np.float32)
    table = pa.Table.from_arrays(
        [
            pa.array([f.timestamp_s for f in episode.frames], pa.float64()),
            pa.array([f.frame_index for f in episode.frames], pa.uint32()),
            pa.array([episode_index] * n, pa.uint32()),
            pa.array(range(global_base, global_base + n), pa.uint64()),
            pa.array([task_index] * n, pa.uint32()),
            pa.FixedSizeListArray.from_arrays(
                pa.array(state.reshape(-1)), OBSERVATION_DIM
            ).cast(STATE_FIELD.type),
            pa.FixedSizeListArray.from_arrays(
                pa.array(action.reshape(-1)), ACTION_DIM
            ).cast(ACTION_FIELD.type),
        ],
        schema=PARQUET_SCHEMA,
    )
    sink = pa.BufferOutputStream()
    pq.write_table(table, sink, compression="zstd")
    return sink.getvalue().to_pybytes()


# ---- readers used by the validator and tests -------------------------------


def read_info(root: Path) -> dict:
    return json.loads((Path(root) / "meta" / "info.json").read_text())


def read_episodes(root: Path) -> list[dict]:
    path = Path(root) / "meta" / "episodes.jsonl"
    with path.open() as fh:
        return [json.loads(line) for line in fh if line.strip()]


def read_episode_table(root: Path, episode_index: int) -> pa.Table:
    path = Path(root) / "data" / CHUNK / f"episode_{episode_index:06d}.parquet"
    return pq.read_table(path)


def count_video_frames(root: Path, source: str, episode_index: int, video_mode: str) -> int:
    base = Path(root) / "videos" / CHUNK / f"observation.images.{source}"
    if video_mode == "mp4":
        import cv2

        cap = cv2.VideoCapture(str(base / f"episode_{episode_index:06d}.mp4"))
        try:
            count = 0
            while cap.read()[0]:
                count += 1
            return count
        finally:
            cap.release()
    return len(list((base / f"episode_{episode_index:06d}").glob("frame_*.png")))
