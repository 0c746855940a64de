import numpy as np
import pytest
from hypothesis import given, strategies as st

from sed_forge.errors import AnnotationError
from sed_forge.events import (
    EventAnnotation,
    EventRoll,
    build_target_matrix,
    parse_annotations,
    read_annotation_file,
    roll_to_events,
    write_annotation_file,
)


def test_parse_format_roundtrip(tmp_path):
    events = [
        EventAnnotation(class_name="tone", onset=0.5, offset=1.25),
        EventAnnotation(class_name="noise", onset=1.0, offset=4.0),
    ]
    path = tmp_path / "ann.tsv"
    write_annotation_file(path, events)
    back = read_annotation_file(path)
    assert [(e.class_name, e.onset, e.offset) for e in back] == [
        ("tone", 0.5, 1.25), ("noise", 1.0, 4.0)]


@pytest.mark.parametrize("text", [
    "0.5\t1.0",                    # missing class column
    "a\t1.0\ttone",                # non-numeric onset
    "2.0\t1.0\ttone",              # offset before onset
    "0.5\t1.0\ttone\textra\tmore\tcolumns",
])
def test_malformed_lines_rejected(text):
    with pytest.raises(AnnotationError):
        parse_annotations(text + "\n")


def test_negative_onset_rejected():
    with pytest.raises(AnnotationError):
        EventAnnotation(class_name="tone", onset=-0.1, offset=0.5)


def test_worked_frame_example():
    # an event on [0.05, 0.10) at 20 ms hop overlaps frames 2, 3 and 4
    events = [EventAnnotation(class_name="tone", onset=0.05, offset=0.10)]
    roll = build_target_matrix(events, ["tone"], num_frames=8, frame_hop_seconds=0.02)
    assert list(np.flatnonzero(roll.activity[0])) == [2, 3, 4]


def test_event_touching_frame_start_only_is_excluded():
    # [0.04, 0.06) starts exactly at frame 2's left edge and ends at its
    # right edge: frames 0 and 1 stay silent, frame 3 stays silent
    events = [EventAnnotation(class_name="tone", onset=0.04, offset=0.06)]
    roll = build_target_matrix(events, ["tone"], num_frames=5, frame_hop_seconds=0.02)
    assert list(np.flatnonzero(roll.activity[0])) == [2]


def test_unknown_class_rejected():
    events = [EventAnnotation(class_name="mystery", onset=0.0, offset=0.1)]
    with pytest.raises(AnnotationError):
        build_target_matrix(events, ["tone"], num_frames=5, frame_hop_seconds=0.02)


def test_roll_to_events_merges_runs():
    activity = np.zeros((2, 10), dtype=np.uint8)
    activity[0, 2:5] = 1
    activity[0, 7:9] = 1
    activity[1, 0:10] = 1
    roll = EventRoll(classes=("a", "b"), activity=activity, frame_hop_seconds=0.02)
    events = roll_to_events(roll)
    spans = [(e.class_name, e.onset, e.offset) for e in events]
    assert ("a", pytest.approx(0.04), pytest.approx(0.10)) in spans
    assert ("a", pytest.approx(0.14), pytest.approx(0.18)) in spans
    assert ("b", pytest.approx(0.0), pytest.approx(0.20)) in spans
    assert len(spans) == 3


@given(st.data())
def test_roll_events_roll_roundtrip(data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2 ** 31)))
    num_classes = data.draw(st.integers(1, 3))
    num_frames = data.draw(st.integers(1, 40))
    activity = (rng.random((num_classes, num_frames)) < 0.35).astype(np.uint8)
    classes = tuple(f"c{i}" for i in range(num_classes))
    roll = EventRoll(classes=classes, activity=activity, frame_hop_seconds=0.02)
    events = roll_to_events(roll)
    back = build_target_matrix(events, classes, num_frames, 0.02)
    assert np.array_equal(back.activity, activity)


def test_annotation_file_roundtrip_preserves_frames(tmp_path):
    # file roundtrip (text formatting included) keeps the frame roll intact
    rng = np.random.default_rng(11)
    activity = (rng.random((2, 50)) < 0.3).astype(np.uint8)
    roll = EventRoll(classes=("a", "b"), activity=activity, frame_hop_seconds=0.02)
    path = tmp_path / "ann.tsv"
    write_annotation_file(path, roll_to_events(roll))
    back = build_target_matrix(read_annotation_file(path), ("a", "b"), 50, 0.02)
    assert np.array_equal(back.activity, activity)
