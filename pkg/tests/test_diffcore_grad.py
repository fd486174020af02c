"""Finite-difference oracles for every differentiable primitive."""

import numpy as np
import pytest

from mirep.diffcore import (DiffTensor, broadcast_add_sample, concat, conv2d,
                            dense, depthwise_conv, elu, flatten,
                            gradient_reversal, log, logmeanexp, matmul,
                            max_pool, mean_all, mul, slice_axis,
                            softmax_cross_entropy, softplus, sq_sum, sum_all,
                            take_rows, tile_spatial)
from mirep.diffcore.ops import batch_norm, one_hot
from oracles import fd_grad, relative_error, tape_grads

RNG = np.random.default_rng(77)
TOL = 1e-4


def leaf(shape):
    return DiffTensor(RNG.uniform(-1, 1, size=shape), requires_grad=True)


def check(build_loss, leaves, tol=TOL):
    got = tape_grads(build_loss, leaves)
    want = fd_grad(lambda: float(build_loss().data), [l.data for l in leaves])
    for g, w in zip(got, want):
        assert relative_error(g, w) < tol


def test_conv2d_grads():
    x, k = leaf((2, 3, 8, 2)), leaf((2, 3, 2, 3))
    check(lambda: mean_all(conv2d(x, k)), [x, k])


def test_conv2d_strided_grads():
    x, k = leaf((1, 4, 9, 2)), leaf((2, 3, 2, 2))
    check(lambda: mean_all(elu(conv2d(x, k, stride=(2, 3)))), [x, k])


def test_depthwise_grads():
    x, k = leaf((2, 4, 6, 3)), leaf((2, 3, 3, 2))
    check(lambda: mean_all(depthwise_conv(x, k)), [x, k])


def test_dense_grads():
    x, w, b = leaf((5, 4)), leaf((4, 3)), leaf((3,))
    check(lambda: mean_all(elu(dense(x, w, b))), [x, w, b])


def test_matmul_grads():
    a, b = leaf((3, 4)), leaf((4, 2))
    check(lambda: sum_all(matmul(a, b)), [a, b])


def test_batch_norm_train_grads():
    x, s, h = leaf((6, 2, 3, 2)), leaf((2,)), leaf((2,))

    def loss():
        out, _, _ = batch_norm(x, s, h, np.zeros(2), np.ones(2), train=True)
        return mean_all(mul(out, out))

    check(loss, [x, s, h])


def test_batch_norm_eval_grads():
    x, s, h = leaf((3, 1, 4, 2)), leaf((2,)), leaf((2,))
    rm, rv = RNG.normal(size=2), RNG.uniform(0.5, 2.0, size=2)

    def loss():
        out, _, _ = batch_norm(x, s, h, rm, rv, train=False)
        return mean_all(elu(out))

    check(loss, [x, s, h])


def test_elu_grads():
    x = leaf((40,))
    check(lambda: sum_all(mul(elu(x), elu(x))), [x])


def test_softplus_grads():
    x = leaf((30,))
    check(lambda: sum_all(softplus(x)), [x])


def test_log_grads():
    x = DiffTensor(RNG.uniform(0.2, 2.0, size=12), requires_grad=True)
    check(lambda: sum_all(log(x)), [x])


def test_logmeanexp_grads():
    x = leaf((15,))
    check(lambda: logmeanexp(x), [x])


def test_max_pool_grads():
    x = leaf((2, 2, 9, 2))
    check(lambda: mean_all(max_pool(x, (1, 3), stride=(1, 2))), [x])


def test_take_rows_grads():
    x = leaf((6, 4))
    order = np.array([3, 1, 5, 0, 2, 4])
    check(lambda: mean_all(mul(take_rows(x, order), take_rows(x, order))), [x])


def test_take_rows_repeated_rows_accumulate():
    x = leaf((4, 3))
    order = np.array([0, 0, 2, 1])
    check(lambda: sum_all(take_rows(x, order)), [x])


def test_tile_spatial_grads():
    x = leaf((2, 5))
    check(lambda: mean_all(tile_spatial(x, 2, 3)), [x])


def test_broadcast_add_sample_grads():
    x, v = leaf((2, 3, 4, 5)), leaf((2, 5))
    check(lambda: mean_all(mul(broadcast_add_sample(x, v),
                               broadcast_add_sample(x, v))), [x, v])


def test_concat_slice_grads():
    a, b = leaf((2, 2, 3, 2)), leaf((2, 2, 3, 2))

    def loss():
        joined = concat([a, b], axis=-1)
        return mean_all(mul(slice_axis(joined, -1, 1, 3),
                            slice_axis(joined, -1, 1, 3)))

    check(loss, [a, b])


def test_softmax_cross_entropy_grads():
    x = leaf((5, 2))
    labels = one_hot(RNG.integers(0, 2, size=5), 2)
    check(lambda: softmax_cross_entropy(x, labels), [x], tol=1e-5)


def test_gradient_reversal_negates_composed_gradient():
    x = leaf((8,))

    def with_reversal():
        return sum_all(softplus(gradient_reversal(x)))

    got = tape_grads(with_reversal, [x])[0]
    plain = fd_grad(lambda: float(sum_all(softplus(x)).data), [x.data])[0]
    assert relative_error(got, -plain) < TOL


def test_sq_sum_grads():
    x = leaf((3, 4))
    check(lambda: sq_sum(x), [x])


def test_small_network_grads():
    # conv -> bn -> elu -> pool -> dense chain, every parameter checked
    x = DiffTensor(RNG.uniform(-1, 1, size=(4, 2, 10, 1)))
    k = leaf((1, 3, 1, 2))
    s, h = leaf((2,)), leaf((2,))
    w = leaf((2 * 2 * 4, 2))
    b = leaf((2,))
    labels = one_hot(np.array([0, 1, 1, 0]), 2)

    def loss():
        z, _, _ = batch_norm(conv2d(x, k), s, h, np.zeros(2), np.ones(2),
                             train=True)
        pooled = max_pool(elu(z), (1, 2), stride=(1, 2))
        logits = dense(flatten(pooled), w, b)
        return softmax_cross_entropy(logits, labels)

    check(loss, [k, s, h, w, b])
