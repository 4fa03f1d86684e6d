"""Dataset validator: proves an export is ingestible before training sees it.

Checks structure (meta files, per-episode Parquet, per-camera video),
schema (13-wide observation.state, 7-wide action, column types), count
agreement between manifest / Parquet rows / video frames, timestamp
monotonicity and cadence, index bookkeeping, and value ranges (finite,
rotation deltas inside [-pi, pi)).  Problems are collected with file and
row coordinates; unreadable files become violations, not exceptions.
"""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import dataset as ds
from .recorder import ACTION_DIM, OBSERVATION_DIM


@dataclass(frozen=True)
class Violation:
    file: str
    message: str
    row: Optional[int] = None

    def __str__(self) -> str:
        loc = f"{self.file}" + (f" row {self.row}" if self.row is not None else "")
        return f"{loc}: {self.message}"


@dataclass
class ValidationReport:
    root: str
    violations: list[Violation] = field(default_factory=list)
    episodes_checked: int = 0
    frames_checked: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, file: str, message: str, row: Optional[int] = None) -> None:
        self.violations.append(Violation(file=file, message=message, row=row))

    def summary(self) -> str:
        if self.ok:
            return (
                f"OK: {self.episodes_checked} episodes, "
                f"{self.frames_checked} frames, 0 violations"
            )
        lines = [
            f"FAIL: {len(self.violations)} violation(s) across "
            f"{self.episodes_checked} episode(s)"
        ]
        lines += [f"  - {v}" for v in self.violations]
        return "\n".join(lines)


EXPECTED_COLUMNS = {
    "timestamp": "double",
    "frame_index": "uint32",
    "episode_index": "uint32",
    "index": "uint64",
    "task_index": "uint32",
    "observation.state": ("float", OBSERVATION_DIM),
    "action": ("float", ACTION_DIM),
}


def validate_dataset(root: str | Path, fps_tolerance: float = 0.10) -> ValidationReport:
    root = Path(root)
    report = ValidationReport(root=str(root))

    info_path = root / "meta" / "info.json"
    try:
        info = json.loads(info_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        report.add(str(info_path), f"unreadable info file: {exc}")
        return report

    fps = info.get("fps")
    if not isinstance(fps, (int, float)) or fps <= 0:
        report.add(str(info_path), f"bad fps metadata: {fps!r}")
        fps = None
    video_mode = info.get("video_mode", "mp4")

    episodes_path = root / "meta" / "episodes.jsonl"
    try:
        episodes = ds.read_episodes(root)
    except (OSError, json.JSONDecodeError) as exc:
        report.add(str(episodes_path), f"unreadable episodes manifest: {exc}")
        return report

    if info.get("total_episodes") != len(episodes):
        report.add(
            str(info_path),
            f"total_episodes {info.get('total_episodes')} != manifest rows {len(episodes)}",
        )

    sources = [
        key.split("observation.images.", 1)[1]
        for key in info.get("features", {})
        if key.startswith("observation.images.")
    ]

    global_cursor = 0
    total_frames = 0
    for entry in episodes:
        episode_index = entry.get("episode_index")
        declared_len = entry.get("length")
        parquet_path = root / "data" / ds.CHUNK / f"episode_{episode_index:06d}.parquet"
        try:
            table = ds.read_episode_table(root, episode_index)
        except Exception as exc:
            report.add(str(parquet_path), f"unreadable parquet: {exc}")
            global_cursor += declared_len or 0
            continue

        _check_schema(report, parquet_path, table)
        rows = table.num_rows
        if rows != declared_len:
            report.add(
                str(parquet_path),
                f"row count {rows} != manifest length {declared_len} "
                f"for episode {episode_index}",
            )
        _check_rows(report, parquet_path, table, episode_index, global_cursor, fps)

        for source in sources:
            try:
                n_frames = ds.count_video_frames(root, episode_index=episode_index, source=source, video_mode=video_mode)
            except Exception as exc:
                report.add(
                    str(root / "videos"),
                    f"unreadable video for {source!r} episode {episode_index}: {exc}",
                )
                continue
            if n_frames != rows:
                report.add(
                    str(root / "videos" / ds.CHUNK / f"observation.images.{source}"),
                    f"episode {episode_index}: video frames {n_frames} != parquet rows {rows}",
                )

        global_cursor += rows
        total_frames += rows
        report.episodes_checked += 1
        report.frames_checked += rows

    if info.get("total_frames") != total_frames:
        report.add(
            str(info_path),
            f"total_frames {info.get('total_frames')} != counted rows {total_frames}",
        )
    return report


def _check_schema(report: ValidationReport, path: Path, table) -> None:
    import pyarrow as pa

    for name, expected in EXPECTED_COLUMNS.items():
        if name not in table.column_names:
            report.add(str(path), f"missing column {name!r}")
            continue
        actual = table.schema.field(name).type
        if isinstance(expected, tuple):  # fixed-size list: check structurally
            value_type, width = expected
            ok = (
                pa.types.is_fixed_size_list(actual)
                and actual.list_size == width
                and str(actual.value_type) == value_type
            )
            if not ok:
                report.add(
                    str(path),
                    f"column {name!r} has type {actual}, expected "
                    f"fixed_size_list<{value_type}>[{width}]",
                )
        elif str(actual) != expected:
            report.add(
                str(path), f"column {name!r} has type {actual}, expected {expected}"
            )


def _check_rows(
    report: ValidationReport,
    path: Path,
    table,
    episode_index: int,
    global_base: int,
    fps: Optional[float],
) -> None:
    cols = set(table.column_names)
    if not EXPECTED_COLUMNS.keys() <= cols:
        return  # schema violations already logged; row checks would just cascade

    timestamps = table.column("timestamp").to_numpy()
    frame_idx = table.column("frame_index").to_numpy()
    ep_idx = table.column("episode_index").to_numpy()
    global_idx = table.column("index").to_numpy()
    state = np.asarray(table.column("observation.state").to_numpy(zero_copy_only=False).tolist())
    action = np.asarray(table.column("action").to_numpy(zero_copy_only=False).tolist())

    for row in range(table.num_rows):
        if frame_idx[row] != row:
            report.add(str(path), f"frame_index {frame_idx[row]} != {row}", row=row)
        if ep_idx[row] != episode_index:
            report.add(
                str(path), f"episode_index {ep_idx[row]} != {episode_index}", row=row
            )
        if global_idx[row] != global_base + row:
            report.add(
                str(path),
                f"global index {global_idx[row]} != {global_base + row}",
                row=row,
            )
        if row > 0 and timestamps[row] <= timestamps[row - 1]:
            report.add(
                str(path),
                f"timestamp not strictly increasing: {timestamps[row - 1]} -> {timestamps[row]}",
                row=row,
            )

    if state.ndim != 2 or state.shape[1] != OBSERVATION_DIM:
        report.add(str(path), f"observation.state shape {state.shape} != (N, {OBSERVATION_DIM})")
        return
    if action.ndim != 2 or action.shape[1] != ACTION_DIM:
        report.add(str(path), f"action shape {action.shape} != (N, {ACTION_DIM})")
        return

    for name, arr in (("observation.state", state), ("action", action)):
        bad = np.argwhere(~np.isfinite(arr))
        for row, col in bad[:20]:
            report.add(str(path), f"{name}[{col}] not finite", row=int(row))

    # rotation components must be wrapped: observation rpy and action deltas
    for name, arr, cols_ in (
        ("observation.state rpy", state, (9, 10, 11)),
        ("action delta_rpy", action, (3, 4, 5)),
    ):
        for col in cols_:
            vals = arr[:, col]
            out = np.argwhere((vals < -math.pi) | (vals >= math.pi)).ravel()
            for row in out[:20]:
                report.add(
                    str(path),
                    f"{name} component {col} out of [-pi, pi): {vals[row]:.6f}",
                    row=int(row),
                )

    gripper_vals = np.unique(np.concatenate([state[:, 12], action[:, 6]]))
    bad_gripper = [v for v in gripper_vals if v not in (0.0, 1.0)]
    if bad_gripper:
        report.add(str(path), f"gripper values outside {{0,1}}: {bad_gripper[:5]}")

    if fps and table.num_rows >= 3:
        intervals = np.diff(timestamps)
        median = float(statistics.median(intervals))
        nominal = 1.0 / fps
        if abs(median - nominal) > 0.10 * nominal:
            report.add(
                str(path),
                f"median frame interval {median * 1e3:.2f} ms deviates from "
                f"nominal {nominal * 1e3:.2f} ms by more than 10%",
            )
