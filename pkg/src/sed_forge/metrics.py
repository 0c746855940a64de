"""Segment-based detection metrics and chunk-level equal error rate.

All counting metrics reduce to integer segment statistics first, so
results are exactly reproducible: two runs that see the same rolls in
any grouping produce bitwise-identical numbers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConfigError, ShapeError, UndefinedMetricError
from .events import EventRoll


@dataclass(frozen=True)
class SegmentStats:
    """Integer error counts accumulated over segments.

    Mergeable: stats(a) + stats(b) == stats(a concatenated with b).
    """

    tp: int = 0
    fp: int = 0
    fn: int = 0
    subs: int = 0
    ins: int = 0
    dels: int = 0
    actives: int = 0

    def __post_init__(self):
        for name in ("tp", "fp", "fn", "subs", "ins", "dels", "actives"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")

    def __add__(self, other: "SegmentStats") -> "SegmentStats":
        return SegmentStats(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            fn=self.fn + other.fn,
            subs=self.subs + other.subs,
            ins=self.ins + other.ins,
            dels=self.dels + other.dels,
            actives=self.actives + other.actives,
        )


@dataclass(frozen=True)
class SegmentedComparison:
    """Per-segment class activity for a (reference, prediction) pair."""

    segment_frames: int
    classes: tuple[str, ...]
    ref_active: np.ndarray   # (num_segments, K) bool
    pred_active: np.ndarray  # (num_segments, K) bool


def one_second_segment_frames(frame_hop_seconds: float) -> int:
    """Number of frames covering one second at the given hop."""
    if frame_hop_seconds <= 0:
        raise ConfigError("frame_hop_seconds must be > 0")
    return max(1, int(round(1.0 / frame_hop_seconds)))


def segment_rolls(reference: EventRoll, prediction: EventRoll,
                  segment_frames: int) -> SegmentedComparison:
    """Collapse paired rolls to segment-level activity.

    A class counts as active in a segment when any frame of that segment
    is active; the trailing partial segment is kept.
    """
    if not isinstance(segment_frames, (int, np.integer)) or segment_frames < 1:
        raise ConfigError(f"segment_frames must be a positive integer, got {segment_frames!r}")
    if reference.classes != prediction.classes:
        raise ShapeError("reference and prediction class lists differ")
    if reference.activity.shape != prediction.activity.shape:
        raise ShapeError(
            f"roll shapes differ: {reference.activity.shape} vs {prediction.activity.shape}")
    if reference.frame_hop_seconds != prediction.frame_hop_seconds:
        raise ShapeError("reference and prediction frame hops differ")
    num_classes, num_frames = reference.activity.shape
    if num_frames == 0:
        empty = np.zeros((0, num_classes), dtype=bool)
        return SegmentedComparison(int(segment_frames), reference.classes, empty, empty.copy())
    starts = np.arange(0, num_frames, segment_frames)
    ref = np.add.reduceat(reference.activity, starts, axis=1) > 0
    pred = np.add.reduceat(prediction.activity, starts, axis=1) > 0
    return SegmentedComparison(int(segment_frames), reference.classes,
                               ref.T.copy(), pred.T.copy())


def accumulate_stats(comparison: SegmentedComparison) -> SegmentStats:
    """Count TP/FP/FN and the substitution decomposition over segments."""
    ref = comparison.ref_active
    pred = comparison.pred_active
    fp_per_seg = (pred & ~ref).sum(axis=1)
    fn_per_seg = (ref & ~pred).sum(axis=1)
    subs_per_seg = np.minimum(fp_per_seg, fn_per_seg)
    return SegmentStats(
        tp=int((ref & pred).sum()),
        fp=int(fp_per_seg.sum()),
        fn=int(fn_per_seg.sum()),
        subs=int(subs_per_seg.sum()),
        ins=int((fp_per_seg - subs_per_seg).sum()),
        dels=int((fn_per_seg - subs_per_seg).sum()),
        actives=int(ref.sum()),
    )


def f1_from_stats(stats: SegmentStats) -> tuple[float, float, float]:
    """Micro precision, recall, F1; zero denominators give 0."""
    precision = stats.tp / (stats.tp + stats.fp) if stats.tp + stats.fp > 0 else 0.0
    recall = stats.tp / (stats.tp + stats.fn) if stats.tp + stats.fn > 0 else 0.0
    if precision + recall > 0.0:
        f1 = 2.0 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
    return precision, recall, f1


def error_rate_from_stats(stats: SegmentStats) -> float:
    """(substitutions + insertions + deletions) / active references."""
    if stats.actives == 0:
        raise UndefinedMetricError("error rate undefined: no active reference classes")
    return (stats.subs + stats.ins + stats.dels) / stats.actives


def scene_average(values: list[float]) -> float:
    """Unweighted mean over scenes."""
    if len(values) == 0:
        raise UndefinedMetricError("scene average of zero scenes")
    return math.fsum(values) / len(values)


def legacy_f1(references: list[EventRoll], predictions: list[EventRoll],
              segment_frames: int, scenes: list[str] | None = None) -> float:
    """Segment-then-scene averaged F1.

    F1 is computed in every segment, averaged over the segments of each
    scene, then averaged across scenes.  Segments empty in both the
    reference and the prediction are skipped; a scene with no scorable
    segments is skipped; no scorable segment anywhere is an error.
    """
    if len(references) != len(predictions):
        raise ShapeError("reference and prediction lists differ in length")
    if scenes is None:
        scenes = ["default"] * len(references)
    if len(scenes) != len(references):
        raise ShapeError("scene labels do not match the number of rolls")
    per_scene: dict[str, list[float]] = {}
    for ref_roll, pred_roll, scene in zip(references, predictions, scenes):
        comparison = segment_rolls(ref_roll, pred_roll, segment_frames)
        scores = per_scene.setdefault(scene, [])
        for ref_seg, pred_seg in zip(comparison.ref_active, comparison.pred_active):
            if not ref_seg.any() and not pred_seg.any():
                continue
            seg_stats = SegmentStats(
                tp=int((ref_seg & pred_seg).sum()),
                fp=int((pred_seg & ~ref_seg).sum()),
                fn=int((ref_seg & ~pred_seg).sum()),
            )
            scores.append(f1_from_stats(seg_stats)[2])
    scene_scores = [math.fsum(scores) / len(scores)
                    for scores in per_scene.values() if len(scores) > 0]
    if len(scene_scores) == 0:
        raise UndefinedMetricError("legacy F1 undefined: no scorable segments")
    return math.fsum(scene_scores) / len(scene_scores)


@dataclass(frozen=True)
class EerResult:
    """Per-class equal error rates; excluded classes hold nan."""

    per_class: np.ndarray
    mean: float


def _class_eer(labels: np.ndarray, scores: np.ndarray) -> Fraction:
    """Exact EER for one class via a rational ROC sweep.

    Equal scores collapse into one threshold; the crossing between the
    adjacent operating points where the false negative rate falls below
    the false positive rate is located by linear interpolation.  All
    arithmetic is rational, so the result is deterministic down to the
    final rounding to float.
    """
    positives = int(labels.sum())
    negatives = int(labels.size - positives)
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    points = [(Fraction(0), Fraction(1))]
    true_pos = 0
    false_pos = 0
    i = 0
    while i < labels.size:
        j = i
        while j < labels.size and sorted_scores[j] == sorted_scores[i]:
            j += 1
        hits = int(sorted_labels[i:j].sum())
        true_pos += hits
        false_pos += (j - i) - hits
        points.append((Fraction(false_pos, negatives),
                       Fraction(positives - true_pos, positives)))
        i = j
    for idx, (fpr, fnr) in enumerate(points):
        if fnr <= fpr:
            if fnr == fpr:
                return fpr
            prev_fpr, prev_fnr = points[idx - 1]
            gap_prev = prev_fnr - prev_fpr
            gap_here = fnr - fpr
            t = gap_prev / (gap_prev - gap_here)
            return prev_fpr + t * (fpr - prev_fpr)
    raise UndefinedMetricError("no equal-error crossing found")  # pragma: no cover


def eer(references: np.ndarray, scores: np.ndarray,
        classes: tuple[str, ...] | None = None) -> EerResult:
    """Chunk-level equal error rate per class and averaged.

    references: (num_chunks, K) binary labels; scores: matching array of
    real-valued scores.  A class with no positive or no negative chunk
    cannot define an EER; it is excluded with a warning and the mean is
    taken over the remaining classes.
    """
    references = np.asarray(references)
    scores = np.asarray(scores, dtype=np.float64)
    if references.ndim != 2 or scores.shape != references.shape:
        raise ShapeError(
            f"references {references.shape} and scores {scores.shape} must both be (chunks, K)")
    if references.shape[0] == 0:
        raise UndefinedMetricError("EER undefined: no chunks")
    labels = (references > 0).astype(np.int64)
    num_classes = references.shape[1]
    per_class = np.full(num_classes, np.nan)
    fractions: list[Fraction] = []
    for k in range(num_classes):
        name = classes[k] if classes is not None else str(k)
        positives = int(labels[:, k].sum())
        if positives == 0 or positives == labels.shape[0]:
            warnings.warn(f"class {name}: needs both positive and negative chunks, "
                          "excluded from EER", stacklevel=2)
            continue
        value = _class_eer(labels[:, k], scores[:, k])
        fractions.append(value)
        per_class[k] = float(value)
    if len(fractions) == 0:
        raise UndefinedMetricError("EER undefined for every class")
    mean = float(sum(fractions, Fraction(0)) / len(fractions))
    return EerResult(per_class=per_class, mean=mean)
