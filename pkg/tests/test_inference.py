import numpy as np
import pytest
from hypothesis import given, strategies as st

from sed_forge.errors import ConfigError, ShapeError
from sed_forge.features import FeatureMatrix, split_sequences
from sed_forge.inference import (
    ActivityProbabilities,
    binarize,
    detect_events,
    load_probabilities,
    predict,
    predict_chunk,
    save_probabilities,
)
from sed_forge.nn.network import Network
from sed_forge.nn.spec import DenseSpec, NetworkSpec, RecurrentSpec, TemporalMaxPoolSpec

BANDS = 6
CLASSES = ("alpha", "beta")
HOP = 0.02


def frame_network(seed=0):
    spec = NetworkSpec(num_bands=BANDS, num_classes=2,
                       layers=(RecurrentSpec(units=4), DenseSpec(units=2)), seed=seed)
    return Network.initialize(spec, dtype=np.float64)


def tagging_network(seed=0):
    spec = NetworkSpec(num_bands=BANDS, num_classes=2,
                       layers=(RecurrentSpec(units=4), TemporalMaxPoolSpec(),
                               DenseSpec(units=2)), seed=seed)
    return Network.initialize(spec, dtype=np.float64)


def features_of(frames, seed=0):
    rng = np.random.default_rng(seed)
    return FeatureMatrix(rng.standard_normal((BANDS, frames)), HOP, normalized=True)


class TestPredict:
    def test_matches_manual_window_assembly(self):
        net = frame_network()
        features = features_of(70)
        probs = predict(net, features, CLASSES, sequence_frames=32)
        assert probs.values.shape == (2, 70)
        assert probs.frame_hop_seconds == HOP

        # same computation by hand: batch the tiled windows, concatenate,
        # trim the padded tail
        windows = split_sequences(features, length_frames=32)
        out = net.forward(np.stack([w.features for w in windows]), training=False)
        manual = np.concatenate([out[i] for i in range(out.shape[0])], axis=1)[:, :70]
        assert np.array_equal(probs.values, manual)

    def test_window_length_changes_values_not_shape(self):
        net = frame_network()
        features = features_of(50)
        a = predict(net, features, CLASSES, sequence_frames=25)
        b = predict(net, features, CLASSES, sequence_frames=10)
        assert a.values.shape == b.values.shape == (2, 50)
        # recurrent state resets at window boundaries, so values differ
        assert not np.array_equal(a.values, b.values)

    def test_rejects_tagging_network(self):
        with pytest.raises(ConfigError, match="predict_chunk"):
            predict(tagging_network(), features_of(20), CLASSES)

    def test_rejects_class_count_mismatch(self):
        with pytest.raises(ShapeError, match="classes"):
            predict(frame_network(), features_of(20), ("solo",))

    def test_rejects_band_mismatch(self):
        rng = np.random.default_rng(1)
        other = FeatureMatrix(rng.standard_normal((BANDS + 2, 20)), HOP, normalized=True)
        with pytest.raises(ShapeError, match="bands"):
            predict(frame_network(), other, CLASSES)

    def test_rejects_unnormalized_features(self):
        rng = np.random.default_rng(2)
        raw = FeatureMatrix(rng.standard_normal((BANDS, 20)), HOP, normalized=False)
        with pytest.raises(ConfigError, match="normalized"):
            predict(frame_network(), raw, CLASSES)


class TestPredictChunk:
    def test_returns_one_score_per_class(self):
        scores = predict_chunk(tagging_network(), features_of(30))
        assert scores.shape == (2,)
        assert np.all(scores >= 0.0) and np.all(scores <= 1.0)

    def test_rejects_frame_network(self):
        with pytest.raises(ConfigError, match="temporal pooling"):
            predict_chunk(frame_network(), features_of(30))

    def test_rejects_unnormalized_features(self):
        rng = np.random.default_rng(3)
        raw = FeatureMatrix(rng.standard_normal((BANDS, 30)), HOP, normalized=False)
        with pytest.raises(ConfigError, match="normalized"):
            predict_chunk(tagging_network(), raw)


class TestBinarize:
    def test_threshold_is_inclusive(self):
        probs = ActivityProbabilities(
            values=np.array([[0.49, 0.5, 0.51], [0.0, 1.0, 0.5]]),
            classes=CLASSES, frame_hop_seconds=HOP)
        roll = binarize(probs, 0.5)
        assert roll.activity.tolist() == [[False, True, True], [False, True, True]]

    def test_threshold_bounds(self):
        probs = ActivityProbabilities(values=np.zeros((2, 3)), classes=CLASSES,
                                      frame_hop_seconds=HOP)
        for bad in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ConfigError, match="threshold"):
                binarize(probs, bad)

    @given(st.floats(min_value=0.05, max_value=0.95),
           st.floats(min_value=0.05, max_value=0.95))
    def test_raising_threshold_never_adds_activity(self, t1, t2):
        lo, hi = sorted((t1, t2))
        rng = np.random.default_rng(4)
        probs = ActivityProbabilities(values=rng.random((2, 40)), classes=CLASSES,
                                      frame_hop_seconds=HOP)
        loose = binarize(probs, lo).activity
        strict = binarize(probs, hi).activity
        assert not np.any(strict & ~loose)


class TestDetectEvents:
    def test_events_cover_active_runs(self):
        values = np.array([[0.9, 0.9, 0.1, 0.8], [0.1, 0.1, 0.1, 0.1]])
        probs = ActivityProbabilities(values=values, classes=CLASSES,
                                      frame_hop_seconds=HOP)
        result = detect_events(probs, 0.5)
        spans = [(ev.class_name, ev.onset, ev.offset) for ev in result.events]
        assert spans == [("alpha", pytest.approx(0.0), pytest.approx(0.04)),
                         ("alpha", pytest.approx(0.06), pytest.approx(0.08))]
        assert np.array_equal(result.roll.activity, values >= 0.5)

    def test_no_activity_gives_no_events(self):
        probs = ActivityProbabilities(values=np.zeros((2, 5)), classes=CLASSES,
                                      frame_hop_seconds=HOP)
        assert detect_events(probs).events == ()


class TestProbabilityStorage:
    def test_round_trip_is_exact(self, tmp_path):
        rng = np.random.default_rng(5)
        probs = ActivityProbabilities(values=rng.random((2, 33)), classes=CLASSES,
                                      frame_hop_seconds=HOP)
        path = tmp_path / "probs.sfr"
        save_probabilities(path, probs)
        loaded = load_probabilities(path)
        assert np.array_equal(loaded.values, probs.values)
        assert loaded.values.dtype == probs.values.dtype
        assert loaded.classes == probs.classes
        assert loaded.frame_hop_seconds == probs.frame_hop_seconds

    def test_validation_on_construction(self):
        with pytest.raises(ShapeError):
            ActivityProbabilities(values=np.zeros((2, 3, 1)), classes=CLASSES,
                                  frame_hop_seconds=HOP)
        with pytest.raises(ShapeError):
            ActivityProbabilities(values=np.zeros((1, 3)), classes=CLASSES,
                                  frame_hop_seconds=HOP)
        with pytest.raises(ShapeError, match=r"\[0, 1\]"):
            ActivityProbabilities(values=np.full((2, 3), 1.5), classes=CLASSES,
                                  frame_hop_seconds=HOP)
        with pytest.raises(ShapeError):
            ActivityProbabilities(values=np.full((2, 3), np.nan), classes=CLASSES,
                                  frame_hop_seconds=HOP)
