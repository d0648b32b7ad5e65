"""
Tests for the dense tensor kernels and their backward passes.
"""

import numpy as np
import pytest

from src.engine.gradcheck import numerical_gradient, relative_error, sample_indices
from src.engine.tensor import (
    Batch,
    conv2d,
    conv2d_backward,
    conv2d_reference,
    flatten,
    flatten_backward,
    matmul,
    matmul_backward,
    maxpool2d,
    maxpool2d_backward,
    relu,
    relu_backward,
    softmax_cross_entropy,
)
from src.utils.errors import DimensionError

LAYER_TOL = 1e-6


class TestMatmul:
    def test_shapes_and_values(self, rng):
        a = rng.standard_normal((3, 4))
        b = rng.standard_normal((4, 2))
        out, _ = matmul(a, b)
        assert out.shape == (3, 2)
        np.testing.assert_allclose(out, a @ b)

    def test_mismatch_raises(self):
        with pytest.raises(DimensionError):
            matmul(np.zeros((2, 3)), np.zeros((4, 2)))

    def test_backward_matches_finite_differences(self, rng):
        a = rng.standard_normal((3, 4))
        b = rng.standard_normal((4, 2))
        dout = rng.standard_normal((3, 2))
        _, cache = matmul(a, b)
        da, db = matmul_backward(dout, cache)

        def f():
            return float(np.sum(matmul(a, b)[0] * dout))

        assert relative_error(da, numerical_gradient(f, a)) < LAYER_TOL
        assert relative_error(db, numerical_gradient(f, b)) < LAYER_TOL


class TestConv2d:
    def test_identity_kernel(self):
        x = np.arange(16, dtype=np.float64).reshape(1, 1, 4, 4)
        w = np.zeros((1, 1, 3, 3))
        w[0, 0, 1, 1] = 1.0
        out, _ = conv2d(x, w, np.zeros(1), pad=1)
        np.testing.assert_array_equal(out, x)

    def test_output_extent(self, rng):
        x = rng.standard_normal((2, 3, 7, 9))
        w = rng.standard_normal((4, 3, 3, 3))
        out, _ = conv2d(x, w, np.zeros(4), stride=2, pad=1)
        assert out.shape == (2, 4, 4, 5)

    @pytest.mark.parametrize("stride,pad", [(1, 0), (1, 2), (2, 1)])
    def test_matches_reference(self, rng, stride, pad):
        x = rng.standard_normal((2, 3, 8, 8))
        w = rng.standard_normal((5, 3, 5, 5))
        b = rng.standard_normal(5)
        out, _ = conv2d(x, w, b, stride, pad)
        np.testing.assert_allclose(out, conv2d_reference(x, w, b, stride, pad), rtol=1e-10, atol=1e-10)

    def test_channel_mismatch_raises(self):
        with pytest.raises(DimensionError):
            conv2d(np.zeros((1, 2, 5, 5)), np.zeros((3, 4, 3, 3)), np.zeros(3))

    def test_kernel_larger_than_input_raises(self):
        with pytest.raises(DimensionError):
            conv2d(np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 5, 5)), np.zeros(1))

    def test_backward_matches_finite_differences(self, rng):
        x = rng.standard_normal((2, 3, 6, 6))
        w = rng.standard_normal((4, 3, 3, 3))
        b = rng.standard_normal(4)
        dout = rng.standard_normal((2, 4, 6, 6))
        _, cache = conv2d(x, w, b, 1, 1)
        dx, dw, db = conv2d_backward(dout, cache)

        def f():
            return float(np.sum(conv2d(x, w, b, 1, 1)[0] * dout))

        for analytic, tensor in [(dx, x), (dw, w), (db, b)]:
            idx = sample_indices(tensor.shape, 20, rng)
            numeric = numerical_gradient(f, tensor, indices=idx)
            picked = np.array([analytic[i] for i in idx])
            assert relative_error(picked, np.array([numeric[i] for i in idx])) < LAYER_TOL


class TestElementwise:
    def test_relu_forward_backward(self):
        x = np.array([[-1.0, 0.0, 2.0]])
        out, cache = relu(x)
        np.testing.assert_array_equal(out, [[0.0, 0.0, 2.0]])
        np.testing.assert_array_equal(relu_backward(np.ones_like(x), cache), [[0.0, 0.0, 1.0]])

    def test_maxpool_picks_window_max(self):
        x = np.array([[1.0, 2.0, 5.0, 0.0],
                      [3.0, 4.0, 1.0, 1.0],
                      [0.0, 0.0, 2.0, 2.0],
                      [9.0, 0.0, 3.0, 1.0]]).reshape(1, 1, 4, 4)
        out, cache = maxpool2d(x)
        np.testing.assert_array_equal(out[0, 0], [[4.0, 5.0], [9.0, 3.0]])
        dx = maxpool2d_backward(np.ones((1, 1, 2, 2)), cache)
        assert dx.sum() == 4.0
        assert dx[0, 0, 1, 1] == 1.0 and dx[0, 0, 0, 2] == 1.0 and dx[0, 0, 3, 0] == 1.0

    def test_maxpool_odd_extent_drops_last_row(self, rng):
        out, _ = maxpool2d(rng.standard_normal((2, 3, 7, 7)))
        assert out.shape == (2, 3, 3, 3)

    def test_maxpool_window_too_large(self):
        with pytest.raises(DimensionError):
            maxpool2d(np.zeros((1, 1, 1, 1)))

    def test_maxpool_backward_matches_finite_differences(self, rng):
        x = rng.standard_normal((2, 2, 6, 6))
        dout = rng.standard_normal((2, 2, 3, 3))
        _, cache = maxpool2d(x)
        dx = maxpool2d_backward(dout, cache)

        def f():
            return float(np.sum(maxpool2d(x)[0] * dout))

        assert relative_error(dx, numerical_gradient(f, x)) < LAYER_TOL

    def test_flatten_is_channel_major(self):
        x = np.arange(2 * 3 * 2 * 2).reshape(2, 3, 2, 2)
        out, cache = flatten(x)
        assert out.shape == (2, 12)
        np.testing.assert_array_equal(out[0, :4], x[0, 0].ravel())
        np.testing.assert_array_equal(flatten_backward(out, cache), x)


class TestSoftmaxCrossEntropy:
    def test_uniform_logits(self):
        loss, _ = softmax_cross_entropy(np.zeros((4, 10)), np.arange(4))
        assert loss == pytest.approx(np.log(10))

    def test_large_logits_are_stable(self):
        logits = np.array([[1000.0, 0.0], [0.0, 1000.0]])
        loss, grad = softmax_cross_entropy(logits, np.array([0, 1]))
        assert np.isfinite(loss) and loss == pytest.approx(0.0, abs=1e-12)
        assert np.all(np.isfinite(grad))

    def test_label_out_of_range(self):
        with pytest.raises(IndexError):
            softmax_cross_entropy(np.zeros((2, 3)), np.array([0, 3]))

    def test_gradient(self, rng):
        logits = rng.standard_normal((5, 4))
        labels = rng.integers(0, 4, size=5)
        _, grad = softmax_cross_entropy(logits, labels)

        def f():
            return softmax_cross_entropy(logits, labels)[0]

        assert relative_error(grad, numerical_gradient(f, logits)) < LAYER_TOL


class TestBatch:
    def test_rejects_non_nchw(self):
        with pytest.raises(DimensionError):
            Batch(np.zeros((2, 28, 28)), np.zeros(2, dtype=int))

    def test_rejects_label_count(self):
        with pytest.raises(DimensionError):
            Batch(np.zeros((2, 1, 4, 4)), np.zeros(3, dtype=int))
