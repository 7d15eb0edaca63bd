"""Trajectory recordings, window slicing, and train/test splits.

Two on-disk formats are supported:

* ``tsv-frame-ped-xy`` - one record per line, four whitespace-separated
  fields ``frame ped x y``; frame and ped integral, x and y decimal.
* ``csv-sdd`` - comma-separated with the exact header ``frame,ped,x,y`` and
  the same field semantics.

Windows hold every pedestrian that is present for all tau + delta
consecutive samples from a start frame. Coordinates are anchored per
pedestrian by translating so the last observed point sits at the origin;
the untranslated past is kept for computing true inter-pedestrian
distances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, UsageError

FORMATS = ("tsv-frame-ped-xy", "csv-sdd")


@dataclass
class TrajectoryScene:
    scene_id: str
    records: list[tuple[int, int, float, float]]  # (frame, ped, x, y), sorted (ped, frame)
    frame_step: int = 1

    def __post_init__(self):
        self.records = sorted(self.records, key=lambda r: (r[1], r[0]))

    def ped_ids(self) -> list[int]:
        return sorted({r[1] for r in self.records})


def _parse_int_field(raw: str, what: str, lineno: int) -> int:
    try:
        value = float(raw)
    except ValueError:
        raise DataError(f"line {lineno}: non-numeric {what} field {raw!r}") from None
    if not value.is_integer():
        raise DataError(f"line {lineno}: {what} field {raw!r} is not integral")
    return int(value)


def _parse_float_field(raw: str, what: str, lineno: int) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise DataError(f"line {lineno}: non-numeric {what} field {raw!r}") from None
    if not math.isfinite(value):
        raise DataError(f"line {lineno}: non-finite {what} field {raw!r}")
    return value


def _infer_frame_step(records: list[tuple[int, int, float, float]]) -> int:
    diffs = set()
    by_ped: dict[int, list[int]] = {}
    for frame, ped, _, _ in records:
        by_ped.setdefault(ped, []).append(frame)
    for frames in by_ped.values():
        frames.sort()
        diffs.update(b - a for a, b in zip(frames[:-1], frames[1:]))
    positive = [d for d in diffs if d > 0]
    return min(positive) if positive else 1


def parse_scene(path: str | Path, fmt: str = "tsv-frame-ped-xy", scene_id: str | None = None) -> TrajectoryScene:
    """Parse a recording file; malformed lines are reported by line number."""
    if fmt not in FORMATS:
        raise UsageError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such data file: {path}")
    text = path.read_text()
    lines = text.splitlines()
    start = 0
    if fmt == "csv-sdd":
        if not lines or lines[0].strip() != "frame,ped,x,y":
            raise DataError(f"{path}: csv-sdd requires the header 'frame,ped,x,y'")
        start = 1
    records: list[tuple[int, int, float, float]] = []
    seen: dict[tuple[int, int], int] = {}
    for lineno, line in enumerate(lines[start:], start=start + 1):
        stripped = line.strip()
        if not stripped:
            continue
        fields = stripped.split(",") if fmt == "csv-sdd" else stripped.split()
        if len(fields) != 4:
            raise DataError(f"line {lineno}: expected 4 fields, got {len(fields)}")
        frame = _parse_int_field(fields[0], "frame", lineno)
        ped = _parse_int_field(fields[1], "ped", lineno)
        x = _parse_float_field(fields[2], "x", lineno)
        y = _parse_float_field(fields[3], "y", lineno)
        key = (frame, ped)
        if key in seen:
            raise DataError(
                f"line {lineno}: duplicate record for frame {frame}, ped {ped}"
                f" (first at line {seen[key]})"
            )
        seen[key] = lineno
        records.append((frame, ped, x, y))
    sid = scene_id if scene_id is not None else path.stem
    return TrajectoryScene(scene_id=sid, records=records, frame_step=_infer_frame_step(records))


def write_scene(scene: TrajectoryScene, path: str | Path, fmt: str = "tsv-frame-ped-xy") -> None:
    """Serialize a scene so that parse_scene reads back an identical one."""
    if fmt not in FORMATS:
        raise UsageError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    path = Path(path)
    sep = "," if fmt == "csv-sdd" else "\t"
    lines = []
    if fmt == "csv-sdd":
        lines.append("frame,ped,x,y")
    for frame, ped, x, y in scene.records:
        lines.append(sep.join((str(frame), str(ped), repr(x), repr(y))))
    path.write_text("\n".join(lines) + "\n")


@dataclass
class SceneWindow:
    """One prediction instance: n pedestrians over tau past + delta future samples."""

    scene_id: str
    start_frame: int
    peds: tuple[int, ...]
    past: np.ndarray  # [n, tau, 2], anchored (last observed point at origin)
    future: np.ndarray  # [n, delta, 2], same anchoring
    anchor: np.ndarray  # [n, 2], absolute last observed point per pedestrian
    absolute_past: np.ndarray  # [n, tau, 2], untranslated

    @property
    def n_peds(self) -> int:
        return len(self.peds)

    @property
    def tau(self) -> int:
        return self.past.shape[1]

    @property
    def delta(self) -> int:
        return self.future.shape[1]


def extract_windows(
    scene: TrajectoryScene,
    tau: int = 8,
    delta: int = 12,
    stride: int = 1,
) -> list[SceneWindow]:
    """Slice a scene into co-presence windows of tau + delta samples.

    A window is emitted for every eligible start frame (stepping by
    `stride` samples) at which at least one pedestrian has a record on all
    tau + delta frames spaced by the scene's frame step. Pedestrians not
    spanning the whole window are left out of it.
    """
    if tau < 1 or delta < 1 or stride < 1:
        raise UsageError(f"tau, delta, stride must be >= 1, got {tau}, {delta}, {stride}")
    span = tau + delta
    step = scene.frame_step
    track: dict[int, dict[int, tuple[float, float]]] = {}
    for frame, ped, x, y in scene.records:
        track.setdefault(ped, {})[frame] = (x, y)
    if not track:
        return []
    all_frames = sorted({r[0] for r in scene.records})
    base = all_frames[0]
    windows: list[SceneWindow] = []
    for start in all_frames:
        offset = start - base
        if offset % step != 0 or (offset // step) % stride != 0:
            continue
        needed = [start + i * step for i in range(span)]
        peds = [p for p, frames in track.items() if all(f in frames for f in needed)]
        if not peds:
            continue
        peds.sort()
        coords = np.array(
            [[track[p][f] for f in needed] for p in peds], dtype=np.float64
        )  # [n, span, 2]
        absolute_past = coords[:, :tau, :].copy()
        anchor = coords[:, tau - 1, :].copy()
        past = absolute_past - anchor[:, None, :]
        future = coords[:, tau:, :] - anchor[:, None, :]
        windows.append(
            SceneWindow(
                scene_id=scene.scene_id,
                start_frame=start,
                peds=tuple(peds),
                past=past,
                future=future,
                anchor=anchor,
                absolute_past=absolute_past,
            )
        )
    return windows


@dataclass(frozen=True)
class SplitPlan:
    train_scenes: frozenset[str]
    test_scenes: frozenset[str]
    mode: str = "leave-one-out"

    def __post_init__(self):
        if self.train_scenes & self.test_scenes:
            raise UsageError("train and test scene sets must be disjoint")


def make_splits(
    scene_ids: list[str],
    mode: str = "leave-one-out",
    test_scenes: set[str] | None = None,
) -> list[SplitPlan]:
    """Build split plans: one per held-out scene, or a single fixed split."""
    ids = list(dict.fromkeys(scene_ids))
    if mode == "leave-one-out":
        if len(ids) < 2:
            raise DataError("leave-one-out needs at least two scenes")
        return [
            SplitPlan(frozenset(s for s in ids if s != held), frozenset({held}), mode)
            for held in ids
        ]
    if mode == "fixed":
        if not test_scenes:
            raise UsageError("fixed mode needs an explicit test scene set")
        test = frozenset(test_scenes)
        unknown = test - set(ids)
        if unknown:
            raise DataError(f"test scenes not present in the dataset: {sorted(unknown)}")
        return [SplitPlan(frozenset(set(ids) - test), test, mode)]
    raise UsageError(f"unknown split mode {mode!r}")
