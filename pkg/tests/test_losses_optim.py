import numpy as np
import pytest

import oracles
from sed_forge.errors import DivergedError, ShapeError
from sed_forge.losses import CLAMP_LO, bce_loss
from sed_forge.optim import Adam


class TestBceLoss:
    def test_uniform_half_gives_log_two(self):
        probs = np.full((1, 2, 2), 0.5)
        targets = np.array([[[1.0, 0.0], [0.0, 1.0]]])
        loss, _ = bce_loss(probs, targets)
        assert loss == float(np.log(2.0))

    def test_perfect_confident_prediction(self):
        targets = np.array([[[1.0, 0.0, 1.0]]])
        loss, grad = bce_loss(targets.copy(), targets)
        assert loss < 1e-6
        # outside the clamp interval the loss is flat
        assert np.all(grad == 0.0)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        probs = rng.uniform(0.05, 0.95, (2, 3, 4))
        targets = (rng.random((2, 3, 4)) < 0.5).astype(np.float64)
        _, grad = bce_loss(probs, targets)
        numeric = oracles.numeric_gradient(lambda: bce_loss(probs, targets)[0], probs)
        assert oracles.max_relative_error(grad, numeric) < 1e-5

    def test_mask_excludes_frames_from_loss_and_gradient(self):
        rng = np.random.default_rng(1)
        probs = rng.uniform(0.1, 0.9, (2, 2, 3))
        targets = (rng.random((2, 2, 3)) < 0.5).astype(np.float64)
        mask = np.array([[True, True, False], [True, False, False]])
        loss, grad = bce_loss(probs, targets, mask)
        assert np.all(grad[0, :, 2] == 0.0)
        assert np.all(grad[1, :, 1:] == 0.0)
        kept = np.concatenate([probs[0, :, :2].ravel(), probs[1, :, :1].ravel()])
        kept_y = np.concatenate([targets[0, :, :2].ravel(), targets[1, :, :1].ravel()])
        expected = float(np.mean(-(kept_y * np.log(kept) + (1 - kept_y) * np.log(1 - kept))))
        assert loss == pytest.approx(expected, rel=1e-12)

    def test_masked_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        probs = rng.uniform(0.1, 0.9, (2, 2, 4))
        targets = (rng.random((2, 2, 4)) < 0.5).astype(np.float64)
        mask = rng.random((2, 4)) < 0.6
        mask[0, 0] = True  # keep at least one frame
        _, grad = bce_loss(probs, targets, mask)
        numeric = oracles.numeric_gradient(lambda: bce_loss(probs, targets, mask)[0], probs)
        assert oracles.max_relative_error(grad, numeric) < 1e-5

    def test_all_masked_returns_zero(self):
        probs = np.full((1, 2, 3), 0.7)
        targets = np.zeros((1, 2, 3))
        loss, grad = bce_loss(probs, targets, np.zeros((1, 3), dtype=bool))
        assert loss == 0.0
        assert np.all(grad == 0.0)

    def test_extreme_probabilities_stay_finite(self):
        probs = np.array([[[0.0, 1.0, 1e-12, 1.0 - 1e-12]]])
        targets = np.array([[[1.0, 0.0, 1.0, 0.0]]])
        loss, grad = bce_loss(probs, targets)
        assert np.isfinite(loss)
        assert np.all(np.isfinite(grad))
        assert loss == pytest.approx(-np.log(CLAMP_LO), rel=1e-9)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            bce_loss(np.zeros((1, 2, 3)), np.zeros((1, 2, 4)))
        with pytest.raises(ShapeError, match="mask"):
            bce_loss(np.zeros((1, 2, 3)), np.zeros((1, 2, 3)), np.zeros((1, 2), dtype=bool))


class TestAdam:
    def test_single_step_hand_computation(self):
        params = {"w": np.array([1.0])}
        opt = Adam(params, learning_rate=0.5)
        opt.step(params, {"w": np.array([2.0])})
        m_hat = (0.1 * 2.0) / (1.0 - 0.9)
        v_hat = (0.001 * 4.0) / (1.0 - 0.999)
        expected = 1.0 - 0.5 * m_hat / (np.sqrt(v_hat) + 1e-8)
        assert params["w"][0] == pytest.approx(expected, rel=1e-14)
        # the first step moves by almost exactly the learning rate
        assert abs(1.0 - params["w"][0]) == pytest.approx(0.5, rel=1e-6)

    def test_minimizes_a_quadratic(self):
        params = {"x": np.array([10.0])}
        opt = Adam(params, learning_rate=0.1)
        for _ in range(400):
            opt.step(params, {"x": 2.0 * (params["x"] - 3.0)})
        assert params["x"][0] == pytest.approx(3.0, abs=1e-3)

    def test_nonfinite_gradient_names_the_parameter(self):
        params = {"w": np.zeros(2), "b": np.zeros(1)}
        opt = Adam(params)
        with pytest.raises(DivergedError, match="parameter b"):
            opt.step(params, {"w": np.zeros(2), "b": np.array([np.inf])})

    def test_missing_gradient_rejected(self):
        params = {"w": np.zeros(2)}
        opt = Adam(params)
        with pytest.raises(ShapeError, match="no gradient"):
            opt.step(params, {})

    def test_state_blob_resume_is_bitwise_exact(self):
        rng = np.random.default_rng(3)
        start = rng.standard_normal(5)
        grads = [rng.standard_normal(5) for _ in range(6)]

        straight = {"w": start.copy()}
        opt_a = Adam(straight, learning_rate=0.01)
        for g in grads:
            opt_a.step(straight, {"w": g})

        resumed = {"w": start.copy()}
        opt_b = Adam(resumed, learning_rate=0.01)
        for g in grads[:3]:
            opt_b.step(resumed, {"w": g})
        blobs = {name: value.copy() for name, value in opt_b.state_blobs().items()}
        saved_steps = opt_b.step_count

        opt_c = Adam(resumed, learning_rate=0.01)
        opt_c.load_state_blobs(blobs)
        opt_c.step_count = saved_steps
        for g in grads[3:]:
            opt_c.step(resumed, {"w": g})

        assert np.array_equal(straight["w"], resumed["w"])

    def test_load_state_blobs_rejects_bad_shape(self):
        params = {"w": np.zeros(3)}
        opt = Adam(params)
        blobs = opt.state_blobs()
        blobs = {name: np.zeros(4) for name in blobs}
        with pytest.raises(ShapeError):
            opt.load_state_blobs(blobs)

    def test_updates_happen_in_place(self):
        array = np.array([1.0, 2.0])
        params = {"w": array}
        opt = Adam(params, learning_rate=0.1)
        opt.step(params, {"w": np.array([1.0, -1.0])})
        assert params["w"] is array
        assert not np.array_equal(array, [1.0, 2.0])
