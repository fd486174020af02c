"""Forward-value contracts of the tensor primitives."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mirep.diffcore import (DiffTensor, Tape, as_tensor, backward, conv2d,
                            dense, depthwise_conv, dropout, elu,
                            gradient_reversal, max_pool, mean_all, mul,
                            separable_conv, softmax_cross_entropy, softplus,
                            sum_all)
from mirep.diffcore.ops import batch_norm, one_hot
from mirep.errors import BatchSizeError, ContractError, DimensionError
from oracles import naive_conv2d, naive_depthwise, scanning_max_pool

RNG = np.random.default_rng(20240811)


def t(arr, grad=False):
    return DiffTensor(np.asarray(arr, dtype=np.float64), requires_grad=grad)


class TestConv2d:
    def test_temporal_extent_arithmetic(self):
        x = t(RNG.normal(size=(1, 1, 500, 1)))
        k = t(RNG.normal(size=(1, 10, 1, 3)))
        assert conv2d(x, k).shape == (1, 1, 491, 3)

    def test_identity_pointwise_kernel(self):
        x = t(RNG.normal(size=(2, 3, 4, 5)))
        k = t(np.eye(5).reshape(1, 1, 5, 5))
        np.testing.assert_array_equal(conv2d(x, k).data, x.data)

    def test_matches_naive_loop(self):
        x = RNG.normal(size=(1, 8, 12, 2))
        k = RNG.normal(size=(1, 3, 2, 4))
        got = conv2d(t(x), t(k)).data
        np.testing.assert_allclose(got, naive_conv2d(x, k), atol=1e-6)

    def test_stride(self):
        x = RNG.normal(size=(2, 4, 9, 3))
        k = RNG.normal(size=(2, 3, 3, 2))
        got = conv2d(t(x), t(k), stride=(2, 3)).data
        np.testing.assert_allclose(got, naive_conv2d(x, k, stride=(2, 3)), atol=1e-6)

    def test_depth_mismatch_names_axes(self):
        x = t(np.zeros((1, 4, 4, 3)))
        k = t(np.zeros((2, 2, 5, 1)))
        with pytest.raises(DimensionError):
            conv2d(x, k)


class TestDepthwiseConv:
    def test_zero_kernel(self):
        x = t(RNG.normal(size=(1, 4, 6, 3)))
        k = t(np.zeros((2, 2, 3, 2)))
        assert not depthwise_conv(x, k).data.any()

    def test_per_channel_kernels(self):
        x = RNG.normal(size=(1, 1, 10, 2))
        k = RNG.normal(size=(1, 3, 2, 1))
        out = depthwise_conv(t(x), t(k)).data
        for c in range(2):
            alone = naive_conv2d(x[..., c:c + 1], k[:, :, c:c + 1, :])
            np.testing.assert_allclose(out[..., c:c + 1], alone, atol=1e-6)

    def test_matches_grouped_naive_oracle(self):
        x = RNG.normal(size=(2, 5, 7, 3))
        k = RNG.normal(size=(2, 3, 3, 2))
        got = depthwise_conv(t(x), t(k)).data
        np.testing.assert_allclose(got, naive_depthwise(x, k), atol=1e-6)

    def test_output_channel_grouping(self):
        # channel c of the output depends only on channel c // multiplier
        x = RNG.normal(size=(1, 3, 5, 2))
        k = RNG.normal(size=(1, 2, 2, 3))
        base = depthwise_conv(t(x), t(k)).data
        bumped = x.copy()
        bumped[..., 0] += 1.0
        moved = depthwise_conv(t(bumped), t(k)).data
        changed = np.abs(moved - base).max(axis=(0, 1, 2)) > 0
        np.testing.assert_array_equal(changed, [True] * 3 + [False] * 3)


class TestSeparableConv:
    def test_identity_pointwise_equals_depthwise(self):
        x = t(RNG.normal(size=(1, 2, 9, 2)))
        dw = t(RNG.normal(size=(1, 4, 2, 1)))
        pw = t(np.eye(2).reshape(1, 1, 2, 2))
        np.testing.assert_array_equal(
            separable_conv(x, dw, pw).data, depthwise_conv(x, dw).data)

    def test_dirac_depthwise_equals_pointwise(self):
        x = t(RNG.normal(size=(1, 3, 5, 3)))
        dw = t(np.ones((1, 1, 3, 1)))
        pw = t(RNG.normal(size=(1, 1, 3, 4)))
        np.testing.assert_array_equal(
            separable_conv(x, dw, pw).data, conv2d(x, pw).data)

    def test_composition_bit_identical(self):
        x = t(RNG.normal(size=(2, 2, 11, 3)))
        dw = t(RNG.normal(size=(1, 5, 3, 2)))
        pw = t(RNG.normal(size=(1, 1, 6, 4)))
        fused = separable_conv(x, dw, pw).data
        two_step = conv2d(depthwise_conv(x, dw), pw).data
        np.testing.assert_array_equal(fused, two_step)


class TestMaxPool:
    def test_basic_window(self):
        x = t(np.array([1, 2, 3, 4, 5, 6], dtype=np.float64).reshape(1, 1, 6, 1))
        out = max_pool(x, (1, 3), stride=(1, 3))
        np.testing.assert_array_equal(out.data.ravel(), [3, 6])

    def test_tie_routes_to_first_index(self):
        x = DiffTensor(np.ones((1, 1, 3, 1)), requires_grad=True)
        with Tape():
            loss = sum_all(max_pool(x, (1, 3)))
        backward(loss)
        np.testing.assert_array_equal(x.grad.ravel(), [1, 0, 0])

    def test_matches_scanning_oracle(self):
        x = RNG.normal(size=(2, 6, 9, 3))
        got = max_pool(t(x), (2, 3), stride=(2, 3)).data
        np.testing.assert_array_equal(got, scanning_max_pool(x, (2, 3), (2, 3)))


class TestBatchNorm:
    def test_train_mode_centers_features(self):
        x = t(RNG.normal(3.0, 2.0, size=(16, 2, 5, 4)))
        scale = t(np.ones(4))
        shift = t(np.zeros(4))
        out, _, _ = batch_norm(x, scale, shift, np.zeros(4), np.ones(4),
                               train=True)
        mean = out.data.mean(axis=(0, 1, 2))
        assert np.abs(mean).max() < 1e-5

    def test_eval_mode_is_affine(self):
        x = RNG.normal(size=(3, 1, 4, 2))
        scale, shift = np.array([1.5, 0.5]), np.array([0.2, -0.3])
        rm, rv = np.array([0.1, -0.4]), np.array([0.9, 2.0])
        eps = 1e-3
        out, _, _ = batch_norm(t(x), t(scale), t(shift), rm, rv,
                               eps=eps, train=False)
        want = (x - rm) / np.sqrt(rv + eps) * scale + shift
        np.testing.assert_allclose(out.data, want, rtol=1e-12)

    def test_single_sample_train_rejected(self):
        x = t(np.zeros((1, 1, 4, 2)))
        with pytest.raises(BatchSizeError):
            batch_norm(x, t(np.ones(2)), t(np.zeros(2)), np.zeros(2),
                       np.ones(2), train=True)


class TestElu:
    def test_zero_fixed_point(self):
        assert elu(t([0.0])).data[0] == 0.0

    def test_negative_asymptote(self):
        assert abs(elu(t([-20.0])).data[0] + 1.0) < 1e-8

    def test_positive_passthrough(self):
        x = RNG.uniform(0.1, 5.0, size=7)
        np.testing.assert_array_equal(elu(t(x)).data, x)


class TestSoftplus:
    def test_ln2_at_zero(self):
        assert abs(softplus(t([0.0])).data[0] - np.log(2)) < 1e-12

    def test_large_argument_no_overflow(self):
        x = DiffTensor(np.array([1000.0], dtype=np.float32))
        assert softplus(x).data[0] == np.float32(1000.0)

    @given(st.floats(-50, 50))
    @settings(max_examples=50, deadline=None)
    def test_antisymmetric_identity(self, z):
        got = softplus(t([z])).data[0] - softplus(t([-z])).data[0]
        assert abs(got - z) < 1e-6

    def test_finite_for_extreme_inputs(self):
        x = t([-1e30, -745.0, 0.0, 745.0, 1e30])
        assert np.isfinite(softplus(x).data).all()


class TestDense:
    def test_identity_passthrough(self):
        x = RNG.normal(size=(3, 4))
        out = dense(t(x), t(np.eye(4)), t(np.zeros(4)))
        np.testing.assert_array_equal(out.data, x)

    def test_zero_input_returns_bias(self):
        b = RNG.normal(size=5)
        out = dense(t(np.zeros((2, 3))), t(RNG.normal(size=(3, 5))), t(b))
        np.testing.assert_allclose(out.data, np.tile(b, (2, 1)), rtol=1e-12)

    def test_matches_dot_product_oracle(self):
        x = RNG.normal(size=(4, 6))
        w = RNG.normal(size=(6, 3))
        b = RNG.normal(size=3)
        want = np.array([[x[i] @ w[:, j] + b[j] for j in range(3)]
                         for i in range(4)])
        np.testing.assert_allclose(dense(t(x), t(w), t(b)).data, want, atol=1e-12)


class TestSoftmaxCrossEntropy:
    def test_equal_logits_gives_ln2(self):
        logits = t(np.zeros((5, 2)))
        labels = np.tile([1.0, 0.0], (5, 1))
        loss = softmax_cross_entropy(logits, labels)
        assert abs(loss.data - np.log(2)) < 1e-12

    def test_saturated_margin(self):
        logits = t(np.array([[20.0, 0.0]]))
        loss = softmax_cross_entropy(logits, np.array([[1.0, 0.0]]))
        assert loss.data < 1e-8

    def test_gradient_formula(self):
        raw = RNG.normal(size=(6, 2))
        labels = one_hot(RNG.integers(0, 2, size=6), 2)
        logits = DiffTensor(raw, requires_grad=True)
        with Tape():
            loss = softmax_cross_entropy(logits, labels)
        backward(loss)
        z = raw - raw.max(axis=1, keepdims=True)
        p = np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)
        np.testing.assert_allclose(logits.grad, (p - labels) / 6, atol=1e-12)

    def test_malformed_labels_rejected(self):
        with pytest.raises(ContractError):
            softmax_cross_entropy(t(np.zeros((2, 2))), np.array([[0.5, 0.5],
                                                                 [1.0, 0.0]]))


class TestDropout:
    def test_rate_zero_identity(self):
        x = t(RNG.normal(size=(4, 5)))
        rng = np.random.default_rng(0)
        np.testing.assert_array_equal(dropout(x, 0.0, train=True, rng=rng).data,
                                      x.data)

    def test_eval_identity_any_rate(self):
        x = t(RNG.normal(size=(4, 5)))
        np.testing.assert_array_equal(dropout(x, 0.9, train=False).data, x.data)

    def test_keep_fraction(self):
        x = t(np.ones(100_000))
        rng = np.random.default_rng(11)
        out = dropout(x, 0.5, train=True, rng=rng).data
        keep = (out != 0).mean()
        assert abs(keep - 0.5) < 0.01
        survivors = out[out != 0]
        np.testing.assert_allclose(survivors, 2.0, rtol=1e-12)


class TestGradientReversal:
    def test_forward_identity(self):
        x = t(RNG.normal(size=(3, 4)))
        np.testing.assert_array_equal(gradient_reversal(x).data, x.data)

    def test_unit_negative_gradient(self):
        x = DiffTensor(RNG.normal(size=(3, 4)), requires_grad=True)
        with Tape():
            loss = sum_all(gradient_reversal(x))
        backward(loss)
        np.testing.assert_array_equal(x.grad, -np.ones((3, 4)))


class TestBackward:
    def test_scalar_self_gradient(self):
        x = DiffTensor(np.asarray(3.0), requires_grad=True)
        with Tape():
            loss = mul(x, as_tensor(np.asarray(1.0)))
        backward(loss)
        assert x.grad == 1.0

    def test_product_rule(self):
        a = DiffTensor(np.asarray(2.0), requires_grad=True)
        b = DiffTensor(np.asarray(-1.5), requires_grad=True)
        with Tape():
            loss = mul(a, b)
        backward(loss)
        assert a.grad == -1.5 and b.grad == 2.0

    def test_non_scalar_loss_rejected(self):
        x = DiffTensor(np.ones(3), requires_grad=True)
        with Tape():
            y = elu(x)
        with pytest.raises(ContractError):
            backward(y)

    def test_determinism(self):
        def run():
            rng = np.random.default_rng(5)
            x = DiffTensor(rng.normal(size=(4, 1, 12, 2)), requires_grad=True)
            k = DiffTensor(rng.normal(size=(1, 3, 2, 3)), requires_grad=True)
            with Tape():
                loss = mean_all(elu(conv2d(x, k)))
            backward(loss)
            return loss.data.copy(), x.grad.copy(), k.grad.copy()

        first, second = run(), run()
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a, b)
