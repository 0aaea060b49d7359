import numpy as np
import pytest

from cplxnet.autograd import (NanGuardError, Parameter, Tensor,
                              clip_gradient_norm, concatenate,
                              finite_difference_grad, global_grad_norm,
                              make_node, no_grad)

from conftest import rel_err


class TestBasicOps:
    def test_polynomial_gradient(self):
        # L = x^2 + y^2 at z = 3 + 4i -> grad 6 + 8i
        x = Tensor(3.0, requires_grad=True)
        y = Tensor(4.0, requires_grad=True)
        (x * x + y * y).backward()
        assert x.grad == pytest.approx(6.0)
        assert y.grad == pytest.approx(8.0)

    def test_constant_loss_zero_grads(self):
        x = Tensor(np.ones(3), requires_grad=True)
        (x * 0.0).sum().backward()
        np.testing.assert_array_equal(x.grad, np.zeros(3))

    def test_fanout_accumulates(self):
        x = Tensor(2.0, requires_grad=True)
        # q = (x + 1) * (x + 3): dq/dx = 2x + 4 = 8
        ((x + 1.0) * (x + 3.0)).backward()
        assert x.grad == pytest.approx(8.0)

    def test_division_and_pow(self, rng):
        a = Tensor(rng.uniform(0.5, 2.0, size=(4,)), requires_grad=True)
        b = Tensor(rng.uniform(0.5, 2.0, size=(4,)), requires_grad=True)
        ((a / b) ** 3).sum().backward()
        expect_a = 3 * (a.data / b.data) ** 2 / b.data
        expect_b = -3 * (a.data / b.data) ** 2 * a.data / b.data ** 2
        np.testing.assert_allclose(a.grad, expect_a, rtol=1e-12)
        np.testing.assert_allclose(b.grad, expect_b, rtol=1e-12)

    def test_broadcasting_unbroadcasts_grad(self, rng):
        x = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
        bias = Tensor(rng.standard_normal((4,)), requires_grad=True)
        ((x + bias) * 2.0).sum().backward()
        np.testing.assert_allclose(bias.grad, np.full(4, 6.0))

    def test_matmul_gradients(self, rng):
        a = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
        b = Tensor(rng.standard_normal((4, 2)), requires_grad=True)
        proj = rng.standard_normal((3, 2))
        ((a @ b) * proj).sum().backward()
        np.testing.assert_allclose(a.grad, proj @ b.data.T, rtol=1e-12)
        np.testing.assert_allclose(b.grad, a.data.T @ proj, rtol=1e-12)

    def test_getitem_and_concat_roundtrip(self, rng):
        x = Tensor(rng.standard_normal((2, 6)), requires_grad=True)
        y = concatenate([x[:, :3], x[:, 3:]], axis=1)
        (y * y).sum().backward()
        np.testing.assert_allclose(x.grad, 2 * x.data, rtol=1e-12)

    def test_strided_slice_backward(self, rng):
        x = Tensor(rng.standard_normal((1, 1, 4, 4)), requires_grad=True)
        x[:, :, ::2, ::2].sum().backward()
        expect = np.zeros((1, 1, 4, 4))
        expect[:, :, ::2, ::2] = 1.0
        np.testing.assert_array_equal(x.grad, expect)

    def test_non_scalar_loss_rejected(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(ValueError, match="scalar"):
            (x * 2.0).backward()

    def test_cycle_detection(self):
        a = Tensor(1.0)
        b = make_node(np.asarray(2.0), (a,), lambda g: None)
        a._parents = (b,)  # hand-built cycle
        with pytest.raises(ValueError, match="cycle"):
            b.backward()

    def test_no_grad_detaches(self):
        x = Tensor(1.0, requires_grad=True)
        with no_grad():
            y = x * 3.0
        assert y._parents == ()


class TestComplexChainRule:
    def test_real_part_of_product_matches_hand_partials(self):
        # L = Re(w h) = wr hr - wi hi for complex scalars w, h.
        w = Parameter(np.array(0.7), np.array(-0.3), name="w")
        h = Parameter(np.array(1.2), np.array(0.4), name="h")

        def loss():
            return w.re * h.re - w.im * h.im

        loss().backward()
        # product-rule partials of the complex multiply
        assert w.re.grad == pytest.approx(h.re.data)
        assert w.im.grad == pytest.approx(-h.im.data)
        fd = finite_difference_grad(lambda: loss().item(), [w, h], step=1e-3)
        assert rel_err(w.re.grad, fd[0]) < 1e-6
        assert rel_err(w.im.grad, fd[1]) < 1e-6

    def test_chain_through_substitution(self, rng):
        # z = t^2 expressed over real pairs; grad flows per the real/imag
        # composition of partials. Compare against the oracle.
        t = Parameter(rng.standard_normal(()), rng.standard_normal(()), name="t")

        def loss():
            zr = t.re * t.re - t.im * t.im
            zi = t.re * t.im * 2.0
            return zr * zr + zi * 1.5

        t.zero_grad()
        loss().backward()
        fd = finite_difference_grad(lambda: loss().item(), [t], step=1e-3)
        assert rel_err(t.re.grad, fd[0]) < 1e-6
        assert rel_err(t.im.grad, fd[1]) < 1e-6

    def test_backward_linearity(self, rng):
        x = Parameter(rng.standard_normal(5), name="x")
        proj1 = rng.standard_normal(5)
        proj2 = rng.standard_normal(5)

        def l1():
            return (x.re * proj1).sum()

        def l2():
            return ((x.re * x.re) * proj2).sum()

        alpha, beta = 0.7, -1.3
        x.zero_grad()
        (l1() * alpha + l2() * beta).backward()
        combined = x.re.grad.copy()
        x.zero_grad()
        l1().backward()
        g1 = x.re.grad.copy()
        x.zero_grad()
        l2().backward()
        g2 = x.re.grad.copy()
        np.testing.assert_allclose(combined, alpha * g1 + beta * g2, atol=1e-10)


class TestFiniteDifference:
    def test_quadratic(self):
        p = Parameter(np.array(3.0), name="p")
        grads = finite_difference_grad(lambda: float(p.re.data ** 2), [p], step=1e-3)
        assert grads[0] == pytest.approx(6.0, abs=1e-6)

    def test_constant_function(self):
        p = Parameter(np.ones(4), name="p")
        grads = finite_difference_grad(lambda: 1.5, [p], step=1e-3)
        np.testing.assert_array_equal(grads[0], np.zeros(4))

    def test_nonfinite_eval_names_component(self):
        p = Parameter(np.array([1.0, 0.0]), name="bad")

        def f():
            return float(1.0 / p.re.data[1])

        with pytest.raises(NanGuardError, match="bad"):
            finite_difference_grad(f, [p], step=1e-3)

    def test_step_must_be_positive(self):
        with pytest.raises(ValueError):
            finite_difference_grad(lambda: 0.0, [], step=0.0)


class TestClipGradientNorm:
    def test_scales_when_over(self):
        grads = [np.array([3.0]), np.array([4.0])]  # norm 5 from the 3-4-5 triangle
        norm = clip_gradient_norm(grads, 1.0)
        assert norm == pytest.approx(5.0)
        assert grads[0][0] == pytest.approx(0.6)
        assert grads[1][0] == pytest.approx(0.8)

    def test_unchanged_when_under(self):
        grads = [np.array([0.3]), np.array([0.4])]
        clip_gradient_norm(grads, 1.0)
        assert grads[0][0] == pytest.approx(0.3)

    def test_halves_norm_two(self, rng):
        g = rng.standard_normal(8)
        g *= 2.0 / np.linalg.norm(g)
        grads = [g]
        clip_gradient_norm(grads, 1.0)
        assert np.linalg.norm(grads[0]) == pytest.approx(1.0)

    def test_never_increases_and_idempotent(self, rng):
        for _ in range(20):
            grads = [rng.standard_normal(4) * rng.uniform(0, 3)]
            before = global_grad_norm(grads)
            clip_gradient_norm(grads, 1.0)
            after = global_grad_norm(grads)
            assert after <= before + 1e-12
            clip_gradient_norm(grads, 1.0)
            np.testing.assert_allclose(global_grad_norm(grads), after, rtol=1e-12)

    def test_nonfinite_norm_trips_guard(self):
        with pytest.raises(NanGuardError):
            clip_gradient_norm([np.array([np.nan])], 1.0)
