import numpy as np
import pytest

from deepgraph.numerics import (
    Parameter,
    RmsPropState,
    dropout,
    finite_difference_check,
    glorot_uniform,
    matmul,
    relu,
    relu_backward,
    rmsprop_step,
    softmax_cross_entropy,
)


class TestBasics:
    def test_matmul_shape_check(self):
        with pytest.raises(ValueError, match="shape"):
            matmul(np.ones((2, 3)), np.ones((2, 3)))

    def test_relu_roundtrip(self):
        x = np.array([[-1.0, 0.0, 2.0]])
        y, mask = relu(x)
        assert y.tolist() == [[0.0, 0.0, 2.0]]
        assert relu_backward(np.ones_like(x), mask).tolist() == [[0.0, 0.0, 1.0]]

    def test_glorot_bounds(self):
        w = glorot_uniform(30, 20, np.random.default_rng(0))
        limit = np.sqrt(6 / 50)
        assert w.shape == (30, 20)
        assert np.all(np.abs(w) <= limit)
        assert np.abs(w).max() > 0.9 * limit


class TestDropout:
    def test_identity_outside_training(self):
        x = np.ones((4, 4))
        y, scale = dropout(x, 0.5, np.random.default_rng(0), training=False)
        assert y is x and scale is None

    def test_inverted_scaling_preserves_mean(self):
        x = np.ones((400, 50))
        y, scale = dropout(x, 0.5, np.random.default_rng(0), training=True)
        assert set(np.unique(y)) == {0.0, 2.0}
        assert abs(y.mean() - 1.0) < 0.02
        assert np.array_equal(y, x * scale)

    def test_rate_one_rejected(self):
        with pytest.raises(ValueError):
            dropout(np.ones(3), 1.0, np.random.default_rng(0), training=True)


class TestCrossEntropy:
    def test_uniform_logits(self):
        loss, _ = softmax_cross_entropy(np.zeros((4, 3)), np.array([0, 1, 2, 0]), np.ones(4, bool))
        assert loss == pytest.approx(np.log(3))

    def test_mask_excludes_rows(self):
        logits = np.random.default_rng(0).normal(size=(5, 3))
        mask = np.array([True, False, True, False, False])
        _, grad = softmax_cross_entropy(logits, np.zeros(5, int), mask)
        assert np.all(grad[~mask] == 0)

    def test_gradient_against_finite_differences(self):
        rng = np.random.default_rng(1)
        logits = Parameter("z", rng.normal(size=(6, 4)))
        labels = rng.integers(0, 4, size=6)
        mask = np.array([1, 1, 0, 1, 0, 1], bool)
        _, logits.grad = softmax_cross_entropy(logits.value, labels, mask)
        worst, _ = finite_difference_check(lambda: softmax_cross_entropy(logits.value, labels, mask)[0], [logits])
        assert worst <= 1e-6

    def test_large_logits_stay_finite(self):
        loss, grad = softmax_cross_entropy(np.array([[1000.0, -1000.0]]), np.array([1]), np.array([True]))
        assert loss == pytest.approx(2000.0)
        assert np.all(np.isfinite(grad))

    def test_empty_mask(self):
        with pytest.raises(ValueError, match="empty"):
            softmax_cross_entropy(np.zeros((2, 2)), np.zeros(2, int), np.zeros(2, bool))


class TestRmsProp:
    def test_two_steps_by_hand(self):
        p = Parameter("w", np.array([1.0, -2.0]))
        state = RmsPropState()
        g1 = np.array([0.5, -1.0])
        p.grad[...] = g1
        rmsprop_step([p], state, lr=0.1)
        s1 = 0.1 * g1**2
        w1 = np.array([1.0, -2.0]) - 0.1 * g1 / (np.sqrt(s1) + 1e-8)
        np.testing.assert_allclose(p.value, w1, rtol=1e-15)
        assert np.all(p.grad == 0)

        g2 = np.array([-0.25, 3.0])
        p.grad[...] = g2
        rmsprop_step([p], state, lr=0.1)
        s2 = 0.9 * s1 + 0.1 * g2**2
        np.testing.assert_allclose(p.value, w1 - 0.1 * g2 / (np.sqrt(s2) + 1e-8), rtol=1e-15)

    def test_first_step_size_is_bounded_by_lr(self):
        p = Parameter("w", np.zeros(3))
        p.grad[...] = [1e-3, 1.0, 1e3]
        rmsprop_step([p], RmsPropState(), lr=0.01)
        np.testing.assert_allclose(np.abs(p.value), 0.01 / np.sqrt(0.1), rtol=1e-4)


class TestFiniteDifferences:
    def _quadratic(self):
        p = Parameter("w", np.array([[1.0, 2.0], [-3.0, 0.5]]))
        loss = lambda: float(np.sum(p.value**3))
        p.grad[...] = 3 * p.value**2
        return p, loss

    def test_exact_gradient_passes(self):
        p, loss = self._quadratic()
        worst, per_param = finite_difference_check(loss, [p])
        assert worst < 1e-8
        assert set(per_param) == {"w"}

    def test_wrong_gradient_is_reported(self):
        p, loss = self._quadratic()
        p.grad[0, 0] *= 1.01
        worst, _ = finite_difference_check(loss, [p])
        assert worst == pytest.approx(0.01 / 1.01, rel=1e-4)

    def test_values_restored(self):
        p, loss = self._quadratic()
        before = p.value.copy()
        finite_difference_check(loss, [p])
        assert np.array_equal(p.value, before)

    def test_non_finite_loss(self):
        p = Parameter("w", np.array([0.0]))
        with pytest.raises(FloatingPointError), np.errstate(invalid="ignore"):
            finite_difference_check(lambda: float(np.log(p.value[0])), [p])

    def test_subsampling(self):
        p = Parameter("w", np.arange(100.0))
        calls = []

        def loss():
            calls.append(1)
            return float(np.sum(p.value**2))

        p.grad[...] = 2 * p.value
        finite_difference_check(loss, [p], max_coords=20, rng=np.random.default_rng(0))
        assert len(calls) == 40
