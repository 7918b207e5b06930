"""Tensor engine suite: op semantics, gradient checks, Adam, determinism.

Gradient checks pit reverse-mode gradients against central finite
differences (h = 1e-3) in double precision, rtol 1e-4 / atol 1e-6.
"""

import numpy as np
import pytest

from ifsnet import autodiff as ad
from ifsnet.autodiff import Tensor
from ifsnet.errors import (
    InvalidPError,
    NotScalarError,
    OddSpatialDimError,
    ShapeMismatchError,
)

H = 1e-3
RTOL = 1e-4
ATOL = 1e-6


def numeric_grad(scalar_fn, x: np.ndarray) -> np.ndarray:
    """Central-difference gradient of scalar_fn() w.r.t. array x (mutated in place)."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        orig = x[i]
        x[i] = orig + H
        up = scalar_fn()
        x[i] = orig - H
        down = scalar_fn()
        x[i] = orig
        grad[i] = (up - down) / (2 * H)
    return grad


def check_grads(build_loss, tensors):
    """Assert autodiff and numeric gradients agree for every tracked tensor."""
    loss = build_loss()
    ad.backward(loss)
    for name, t in tensors.items():
        numeric = numeric_grad(lambda: float(build_loss().data), t.data)
        np.testing.assert_allclose(t.grad, numeric, rtol=RTOL, atol=ATOL,
                                   err_msg=f"gradient mismatch for {name}")


class TestConv2d:
    def test_ones_kernel_counts_window(self):
        x = Tensor(np.ones((1, 1, 3, 3)))
        w = Tensor(np.ones((1, 1, 3, 3)))
        b = Tensor(np.zeros(1))
        out = ad.conv2d(x, w, b).data[0, 0]
        assert out[1, 1] == 9
        assert out[0, 0] == out[0, 2] == out[2, 0] == out[2, 2] == 4
        assert out[0, 1] == out[1, 0] == out[1, 2] == out[2, 1] == 6

    def test_identity_kernel(self, rng):
        x = Tensor(rng.normal(size=(2, 1, 5, 5)))
        w = np.zeros((1, 1, 3, 3))
        w[0, 0, 1, 1] = 1.0
        out = ad.conv2d(x, Tensor(w), Tensor(np.zeros(1)))
        np.testing.assert_allclose(out.data, x.data)

    def test_zero_kernel_gives_bias(self, rng):
        x = Tensor(rng.normal(size=(1, 2, 4, 4)))
        out = ad.conv2d(x, Tensor(np.zeros((3, 2, 3, 3))), Tensor(np.array([1.0, -2.0, 0.5])))
        for c, v in enumerate((1.0, -2.0, 0.5)):
            np.testing.assert_allclose(out.data[:, c], v)

    def test_preserves_spatial_size(self, rng):
        out = ad.conv2d(Tensor(rng.normal(size=(2, 3, 6, 10))),
                        Tensor(rng.normal(size=(5, 3, 3, 3))), Tensor(np.zeros(5)))
        assert out.data.shape == (2, 5, 6, 10)

    def test_rejects_wrong_kernel(self, rng):
        with pytest.raises(ShapeMismatchError):
            ad.conv2d(Tensor(rng.normal(size=(1, 1, 4, 4))),
                      Tensor(rng.normal(size=(1, 1, 5, 5))), Tensor(np.zeros(1)))
        with pytest.raises(ShapeMismatchError):
            ad.conv2d(Tensor(rng.normal(size=(1, 2, 4, 4))),
                      Tensor(rng.normal(size=(1, 1, 3, 3))), Tensor(np.zeros(1)))


class TestSpatialOps:
    def test_relu(self):
        out = ad.relu(Tensor(np.array([-1.0, 0.0, 2.0])))
        np.testing.assert_array_equal(out.data, [0.0, 0.0, 2.0])

    def test_max_pool_window(self):
        out = ad.max_pool2x2(Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2)))
        assert out.data.reshape(()) == 4.0

    def test_max_pool_brute_force(self, rng):
        x = rng.normal(size=(2, 3, 6, 8))
        out = ad.max_pool2x2(Tensor(x)).data
        for n in range(2):
            for c in range(3):
                for i in range(3):
                    for j in range(4):
                        assert out[n, c, i, j] == x[n, c, 2*i:2*i+2, 2*j:2*j+2].max()

    def test_max_pool_rejects_odd(self, rng):
        with pytest.raises(OddSpatialDimError):
            ad.max_pool2x2(Tensor(rng.normal(size=(1, 1, 3, 4))))

    def test_upsample_replicates(self):
        x = np.arange(4.0).reshape(1, 1, 2, 2)
        out = ad.upsample2x(Tensor(x)).data
        assert out.shape == (1, 1, 4, 4)
        np.testing.assert_array_equal(
            out[0, 0],
            [[0, 0, 1, 1], [0, 0, 1, 1], [2, 2, 3, 3], [2, 2, 3, 3]])

    def test_pool_then_upsample_restores_shape(self, rng):
        x = Tensor(rng.normal(size=(1, 2, 8, 12)))
        assert ad.upsample2x(ad.max_pool2x2(x)).data.shape == x.data.shape

    def test_concat_channels(self, rng):
        a = Tensor(rng.normal(size=(2, 3, 4, 4)))
        b = Tensor(rng.normal(size=(2, 1, 4, 4)))
        out = ad.concat_channels(a, b)
        assert out.data.shape == (2, 4, 4, 4)
        with pytest.raises(ShapeMismatchError):
            ad.concat_channels(a, Tensor(rng.normal(size=(2, 1, 5, 4))))


class TestBatchNorm:
    def test_train_mode_normalizes(self, rng):
        x = Tensor(rng.normal(loc=3.0, scale=2.5, size=(4, 3, 5, 5)))
        rm, rv = np.zeros(3), np.ones(3)
        out = ad.batch_norm(x, Tensor(np.ones(3)), Tensor(np.zeros(3)), rm, rv, "train")
        np.testing.assert_allclose(out.data.mean(axis=(0, 2, 3)), 0.0, atol=1e-5)
        np.testing.assert_allclose(out.data.var(axis=(0, 2, 3)), 1.0, atol=1e-3)

    def test_eval_identity_stats(self, rng):
        # identity up to the 1/sqrt(1 + eps) factor
        x = Tensor(rng.normal(size=(2, 2, 4, 4)))
        out = ad.batch_norm(x, Tensor(np.ones(2)), Tensor(np.zeros(2)),
                            np.zeros(2), np.ones(2), "eval")
        np.testing.assert_allclose(out.data, x.data, rtol=1e-5, atol=1e-7)

    def test_identical_samples_zero_output(self):
        # zero variance path: normalization is guarded by eps, output is 0
        x = Tensor(np.full((4, 1, 2, 3), 3.7))
        out = ad.batch_norm(x, Tensor(np.ones(1)), Tensor(np.zeros(1)),
                            np.zeros(1), np.ones(1), "train")
        np.testing.assert_allclose(out.data, 0.0, atol=1e-6)

    def test_running_stats_update(self, rng):
        x = rng.normal(loc=5.0, size=(8, 2, 6, 6))
        rm, rv = np.zeros(2), np.ones(2)
        ad.batch_norm(Tensor(x), Tensor(np.ones(2)), Tensor(np.zeros(2)), rm, rv, "train")
        np.testing.assert_allclose(rm, 0.1 * x.mean(axis=(0, 2, 3)), rtol=1e-12)
        np.testing.assert_allclose(rv, 0.9 + 0.1 * x.var(axis=(0, 2, 3)), rtol=1e-12)


class TestDropout:
    def test_p_zero_identity(self, rng):
        x = Tensor(rng.normal(size=(3, 3)))
        np.testing.assert_array_equal(ad.dropout(x, 0.0, "train", 1).data, x.data)

    def test_eval_identity(self, rng):
        x = Tensor(rng.normal(size=(3, 3)))
        np.testing.assert_array_equal(ad.dropout(x, 0.9, "eval", 1).data, x.data)

    def test_survivor_fraction(self):
        x = Tensor(np.ones(10 ** 6))
        out = ad.dropout(x, 0.5, "train", rng_seed=99).data
        survivors = np.count_nonzero(out) / out.size
        assert abs(survivors - 0.5) < 0.002
        np.testing.assert_allclose(out[out != 0], 2.0)

    def test_mask_reproducible(self, rng):
        x = Tensor(rng.normal(size=(100,)))
        a = ad.dropout(x, 0.3, "train", rng_seed=5).data
        b = ad.dropout(x, 0.3, "train", rng_seed=5).data
        c = ad.dropout(x, 0.3, "train", rng_seed=6).data
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_invalid_p(self, rng):
        x = Tensor(rng.normal(size=(2,)))
        for p in (-0.1, 1.0, 1.5):
            with pytest.raises(InvalidPError):
                ad.dropout(x, p, "train", 0)


class TestSoftmaxCrossEntropy:
    def test_uniform_logits(self):
        logits = Tensor(np.zeros((1, 4, 2, 2)))
        target = Tensor(np.full((1, 4, 2, 2), 0.25))
        loss = ad.softmax_cross_entropy(logits, target)
        assert float(loss.data) == pytest.approx(np.log(4.0), abs=1e-12)

    def test_saturated_true_class(self):
        logits = np.zeros((1, 2, 1, 1))
        logits[0, 1] = 50.0
        target = np.zeros((1, 2, 1, 1))
        target[0, 1] = 1.0
        loss = ad.softmax_cross_entropy(Tensor(logits), Tensor(target))
        assert float(loss.data) < 1e-9

    def test_two_class_value(self):
        # K=2, logits (0, ln 3), true class 1: p1 = 0.75, loss = -ln 0.75
        logits = np.array([0.0, np.log(3.0)]).reshape(1, 2, 1, 1)
        target = np.array([0.0, 1.0]).reshape(1, 2, 1, 1)
        loss = ad.softmax_cross_entropy(Tensor(logits), Tensor(target))
        assert float(loss.data) == pytest.approx(0.2876820724517809, abs=1e-12)

    def test_softmax_rows_sum_to_one(self, rng):
        probs = ad.softmax(Tensor(rng.normal(scale=10.0, size=(3, 5, 4, 4))))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-6)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeMismatchError):
            ad.softmax_cross_entropy(Tensor(rng.normal(size=(1, 3, 2, 2))),
                                     Tensor(rng.normal(size=(1, 4, 2, 2))))


class TestBackwardEngine:
    def test_sum_of_squares(self, rng):
        x = Tensor(rng.normal(size=(4, 5)), requires_grad=True)
        ad.backward(ad.sum_all(ad.mul(x, x)))
        np.testing.assert_allclose(x.grad, 2 * x.data, rtol=1e-12)

    def test_untracked_gets_no_grad(self, rng):
        x = Tensor(rng.normal(size=(3,)), requires_grad=True)
        c = Tensor(rng.normal(size=(3,)))
        ad.backward(ad.sum_all(ad.mul(x, c)))
        assert c.grad is None
        np.testing.assert_allclose(x.grad, c.data)

    def test_repeated_backward_accumulates(self, rng):
        x = Tensor(rng.normal(size=(3,)), requires_grad=True)
        loss = ad.sum_all(ad.mul(x, x))
        ad.backward(loss)
        first = x.grad.copy()
        ad.backward(loss)
        np.testing.assert_allclose(x.grad, 2 * first)

    def test_not_scalar(self, rng):
        x = Tensor(rng.normal(size=(3,)), requires_grad=True)
        with pytest.raises(NotScalarError):
            ad.backward(ad.mul(x, x))

    def test_shared_node_fanout(self, rng):
        x = Tensor(rng.normal(size=(4,)), requires_grad=True)
        y = ad.mul(x, x)
        loss = ad.sum_all(ad.add(y, y))
        ad.backward(loss)
        np.testing.assert_allclose(x.grad, 4 * x.data, rtol=1e-12)


class TestGradientChecks:
    def test_conv2d(self, rng):
        x = Tensor(rng.normal(size=(2, 2, 4, 4)), requires_grad=True)
        w = Tensor(rng.normal(size=(3, 2, 3, 3)) * 0.5, requires_grad=True)
        b = Tensor(rng.normal(size=(3,)), requires_grad=True)
        check_grads(lambda: ad.sum_all(ad.mul(ad.conv2d(x, w, b), ad.conv2d(x, w, b))),
                    {"x": x, "w": w, "b": b})

    def test_conv1x1(self, rng):
        x = Tensor(rng.normal(size=(2, 3, 3, 3)), requires_grad=True)
        w = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
        b = Tensor(rng.normal(size=(4,)), requires_grad=True)
        check_grads(lambda: ad.sum_all(ad.mul(ad.conv1x1(x, w, b), ad.conv1x1(x, w, b))),
                    {"x": x, "w": w, "b": b})

    def test_relu(self, rng):
        # keep values away from the kink at 0
        data = rng.normal(size=(3, 4))
        data[np.abs(data) < 0.1] += 0.3
        x = Tensor(data, requires_grad=True)
        check_grads(lambda: ad.sum_all(ad.mul(ad.relu(x), ad.relu(x))), {"x": x})

    def test_max_pool(self, rng):
        # distinct values so the argmax is stable under +-h nudges
        data = rng.permutation(64).astype(np.float64).reshape(1, 1, 8, 8)
        x = Tensor(data, requires_grad=True)
        check_grads(lambda: ad.sum_all(ad.mul(ad.max_pool2x2(x), ad.max_pool2x2(x))),
                    {"x": x})

    def test_upsample(self, rng):
        x = Tensor(rng.normal(size=(1, 2, 3, 3)), requires_grad=True)
        check_grads(lambda: ad.sum_all(ad.mul(ad.upsample2x(x), ad.upsample2x(x))), {"x": x})

    def test_concat(self, rng):
        a = Tensor(rng.normal(size=(1, 2, 3, 3)), requires_grad=True)
        b = Tensor(rng.normal(size=(1, 1, 3, 3)), requires_grad=True)
        check_grads(lambda: ad.sum_all(ad.mul(ad.concat_channels(a, b),
                                              ad.concat_channels(a, b))),
                    {"a": a, "b": b})

    def test_batch_norm_train(self, rng):
        x = Tensor(rng.normal(size=(3, 2, 4, 4)), requires_grad=True)
        g = Tensor(rng.normal(size=(2,)), requires_grad=True)
        bt = Tensor(rng.normal(size=(2,)), requires_grad=True)

        def loss():
            y = ad.batch_norm(x, g, bt, np.zeros(2), np.ones(2), "train")
            return ad.sum_all(ad.mul(y, y))

        check_grads(loss, {"x": x, "gamma": g, "beta": bt})

    def test_batch_norm_eval(self, rng):
        x = Tensor(rng.normal(size=(2, 2, 3, 3)), requires_grad=True)
        g = Tensor(rng.normal(size=(2,)), requires_grad=True)
        bt = Tensor(rng.normal(size=(2,)), requires_grad=True)
        rm, rv = rng.normal(size=2), rng.uniform(0.5, 2.0, size=2)

        def loss():
            y = ad.batch_norm(x, g, bt, rm.copy(), rv.copy(), "eval")
            return ad.sum_all(ad.mul(y, y))

        check_grads(loss, {"x": x, "gamma": g, "beta": bt})

    def test_dropout_fixed_mask(self, rng):
        x = Tensor(rng.normal(size=(5, 5)), requires_grad=True)
        check_grads(lambda: ad.sum_all(ad.mul(ad.dropout(x, 0.4, "train", 11),
                                              ad.dropout(x, 0.4, "train", 11))),
                    {"x": x})

    def test_softmax_cross_entropy(self, rng):
        z = Tensor(rng.normal(size=(2, 4, 3, 3)), requires_grad=True)
        target = np.zeros((2, 4, 3, 3))
        classes = rng.integers(0, 4, size=(2, 3, 3))
        for n in range(2):
            for i in range(3):
                for j in range(3):
                    target[n, classes[n, i, j], i, j] = 1.0
        t = Tensor(target)
        check_grads(lambda: ad.softmax_cross_entropy(z, t), {"logits": z})

    def test_composite_pipeline(self):
        """conv -> BN -> ReLU -> pool -> upsample -> concat, as the nets wire it."""
        # seed picked so activations sit > 0.05 from the ReLU kink and pool
        # windows have > 0.08 top-2 gaps: finite differences stay one-sided
        rng = np.random.default_rng(217)
        x = Tensor(rng.normal(size=(2, 2, 4, 4)), requires_grad=True)
        w = Tensor(rng.normal(size=(3, 2, 3, 3)) * 0.5, requires_grad=True)
        b = Tensor(rng.normal(size=(3,)), requires_grad=True)
        g = Tensor(rng.uniform(0.5, 1.5, size=(3,)), requires_grad=True)
        bt = Tensor(rng.normal(size=(3,)), requires_grad=True)
        t = np.zeros((2, 6, 4, 4))
        t[:, 0] = 1.0

        def loss():
            h = ad.relu(ad.batch_norm(ad.conv2d(x, w, b), g, bt,
                                      np.zeros(3), np.ones(3), "train"))
            h = ad.concat_channels(ad.upsample2x(ad.max_pool2x2(h)), h)
            return ad.softmax_cross_entropy(h, Tensor(t))

        check_grads(loss, {"x": x, "w": w, "b": b, "gamma": g, "beta": bt})


class TestAdam:
    def test_zero_gradient_keeps_params(self):
        p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
        state = ad.AdamState()
        ad.adam_step({"p": p}, {"p": np.zeros(2)}, state)
        np.testing.assert_array_equal(p.data, [1.0, -2.0])

    def test_first_step_magnitude(self):
        # at t=1 with |g| >> eps the bias-corrected update is ~lr * sign(g)
        p = Tensor(np.array([0.0]), requires_grad=True)
        ad.adam_step({"p": p}, {"p": np.array([10.0])}, ad.AdamState(), lr=1e-3)
        assert p.data[0] == pytest.approx(-1e-3, rel=1e-6)

    def test_two_steps_decrease_quadratic(self):
        # f(w) = (w - 3)^2, minimized from w = 0
        w = Tensor(np.array([0.0]), requires_grad=True)
        state = ad.AdamState()

        def f():
            return float((w.data[0] - 3.0) ** 2)

        start = f()
        for _ in range(2):
            grad = np.array([2.0 * (w.data[0] - 3.0)])
            ad.adam_step({"w": w}, {"w": grad}, state, lr=0.1)
        assert f() < start

    def test_quadratic_converges(self):
        w = Tensor(np.array([5.0]), requires_grad=True)
        state = ad.AdamState()
        for _ in range(500):
            grad = np.array([2.0 * (w.data[0] - 3.0)])
            ad.adam_step({"w": w}, {"w": grad}, state, lr=0.05)
        assert abs(w.data[0] - 3.0) < 1e-2


class TestDeterminism:
    def test_forward_backward_bit_identical(self, rng):
        def run():
            r = np.random.default_rng(4242)
            x = Tensor(r.normal(size=(2, 2, 8, 8)).astype(np.float32), requires_grad=True)
            w = Tensor(r.normal(size=(3, 2, 3, 3)).astype(np.float32), requires_grad=True)
            b = Tensor(np.zeros(3, dtype=np.float32), requires_grad=True)
            h = ad.max_pool2x2(ad.relu(ad.conv2d(x, w, b)))
            h = ad.dropout(h, 0.25, "train", rng_seed=77)
            loss = ad.sum_all(ad.mul(h, h))
            ad.backward(loss)
            return loss.data.copy(), x.grad.copy(), w.grad.copy()

        la, xa, wa = run()
        lb, xb, wb = run()
        assert la.tobytes() == lb.tobytes()
        assert xa.tobytes() == xb.tobytes()
        assert wa.tobytes() == wb.tobytes()
