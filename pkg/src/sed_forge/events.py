"""Event annotations, binary activity rolls, and conversions between them.

Annotation files are tab-separated lines "onset<TAB>offset<TAB>class", times
in seconds. A frame t counts as active for an event when the frame's hop span
[t*hop, (t+1)*hop) intersects [onset, offset) by any amount.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AnnotationError, ConfigError, ShapeError


@dataclass(frozen=True)
class EventAnnotation:
    """One labeled event occurrence inside a recording."""

    class_name: str
    onset: float
    offset: float
    source_file: str = ""

    def __post_init__(self):
        if not self.class_name:
            raise AnnotationError("class name must be non-empty")
        if not 0 <= self.onset < self.offset:
            raise AnnotationError(
                f"need 0 <= onset < offset, got onset={self.onset} offset={self.offset}"
            )


@dataclass(frozen=True)
class EventRoll:
    """Binary class-by-frame activity matrix; rows may overlap (polyphony)."""

    classes: tuple[str, ...]
    activity: np.ndarray  # (K, T) bool
    frame_hop_seconds: float

    def __post_init__(self):
        activity = np.asarray(self.activity)
        if activity.ndim != 2:
            raise ShapeError(f"activity must be 2-D, got shape {activity.shape}")
        if activity.shape[0] != len(self.classes):
            raise ShapeError(
                f"{len(self.classes)} classes but {activity.shape[0]} activity rows"
            )
        if activity.dtype != bool:
            unique = np.unique(activity)
            if not np.all(np.isin(unique, (0, 1))):
                raise ShapeError("activity entries must be 0/1")
            activity = activity.astype(bool)
        if self.frame_hop_seconds <= 0:
            raise ConfigError(f"frame_hop_seconds must be positive, got {self.frame_hop_seconds}")
        object.__setattr__(self, "activity", activity)

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def num_frames(self) -> int:
        return self.activity.shape[1]


def parse_annotations(text: str) -> list[EventAnnotation]:
    """Parse annotation text; one event per non-empty line, order preserved."""
    events = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise AnnotationError(
                f"line {lineno}: expected 3 tab-separated fields, got {len(parts)}: {raw!r}"
            )
        onset_text, offset_text, class_name = parts
        try:
            onset = float(onset_text)
            offset = float(offset_text)
        except ValueError as exc:
            raise AnnotationError(f"line {lineno}: non-numeric time in {raw!r}") from exc
        try:
            events.append(EventAnnotation(class_name=class_name.strip(), onset=onset, offset=offset))
        except AnnotationError as exc:
            raise AnnotationError(f"line {lineno}: {exc}") from exc
    return events


def format_annotations(events: list[EventAnnotation]) -> str:
    """Render events in the annotation file format, one per line.

    Times use shortest round-trip formatting, so writing and re-reading
    annotations preserves frame alignment bit for bit.
    """
    lines = [f"{float(ev.onset)!r}\t{float(ev.offset)!r}\t{ev.class_name}" for ev in events]
    return "".join(line + "\n" for line in lines)


def read_annotation_file(path: str | Path) -> list[EventAnnotation]:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return parse_annotations(text)
    except AnnotationError as exc:
        raise AnnotationError(f"{path}: {exc}") from exc


def write_annotation_file(path: str | Path, events: list[EventAnnotation]) -> None:
    Path(path).write_text(format_annotations(events), encoding="utf-8")


def build_target_matrix(
    annotations: list[EventAnnotation],
    classes: list[str] | tuple[str, ...],
    num_frames: int,
    frame_hop_seconds: float,
) -> EventRoll:
    """Rasterize annotations onto the frame grid.

    Frame t is active for class k iff [t*hop, (t+1)*hop) overlaps the
    [onset, offset) interval of any annotation of class k.
    """
    if num_frames < 1:
        raise ShapeError(f"num_frames must be at least 1, got {num_frames}")
    classes = tuple(classes)
    index = {name: k for k, name in enumerate(classes)}
    unknown = sorted({ev.class_name for ev in annotations} - set(classes))
    if unknown:
        raise AnnotationError(f"annotations name classes outside the class list: {unknown}")

    hop = float(frame_hop_seconds)
    # products with the identical hop value keep roll <-> events round trips exact
    starts = np.arange(num_frames, dtype=np.float64) * hop
    ends = np.arange(1, num_frames + 1, dtype=np.float64) * hop
    activity = np.zeros((len(classes), num_frames), dtype=bool)
    for ev in annotations:
        overlap = (ev.onset < ends) & (ev.offset > starts)
        activity[index[ev.class_name]] |= overlap
    return EventRoll(classes=classes, activity=activity, frame_hop_seconds=hop)


def roll_to_events(roll: EventRoll) -> list[EventAnnotation]:
    """Maximal runs of active frames become events.

    Onset is the first frame's start time; offset is the start time of the
    frame after the run. Events come back sorted by (onset, offset, class).
    """
    hop = roll.frame_hop_seconds
    events = []
    for k, class_name in enumerate(roll.classes):
        row = roll.activity[k].astype(np.int8)
        boundaries = np.flatnonzero(np.diff(np.concatenate(([0], row, [0]))))
        for run_start, run_end in zip(boundaries[::2], boundaries[1::2]):
            events.append(
                EventAnnotation(
                    class_name=class_name,
                    onset=run_start * hop,
                    offset=run_end * hop,
                )
            )
    events.sort(key=lambda ev: (ev.onset, ev.offset, ev.class_name))
    return events
