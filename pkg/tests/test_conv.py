import numpy as np
import pytest

from cplxnet.autograd import Parameter, Tensor
from cplxnet.conv import (ComplexConv2d, ComplexDense, Conv2d, Dense,
                          count_real_multiplies, conv2d, global_avg_pool,
                          head_bridge)
from cplxnet.ctensor import ComplexTensor
from cplxnet.verify import gradcheck_conv, gradcheck_dense

from conftest import rel_err


def naive_complex_conv(x_re, x_im, a, b, stride=1, pad=0):
    """Quadruple-loop oracle: four real convolutions combined per the
    complex product. Independent of the im2col implementation."""

    def real_conv(x, w):
        n, c, h, wdt = x.shape
        f, _, kh, kw = w.shape
        xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        oh = (h + 2 * pad - kh) // stride + 1
        ow = (wdt + 2 * pad - kw) // stride + 1
        out = np.zeros((n, f, oh, ow))
        for ni in range(n):
            for fi in range(f):
                for oi in range(oh):
                    for oj in range(ow):
                        acc = 0.0
                        for ci in range(c):
                            for ki in range(kh):
                                for kj in range(kw):
                                    acc += (xp[ni, ci, oi * stride + ki, oj * stride + kj]
                                            * w[fi, ci, ki, kj])
                        out[ni, fi, oi, oj] = acc
        return out

    return (real_conv(x_re, a) - real_conv(x_im, b),
            real_conv(x_re, b) + real_conv(x_im, a))


class TestComplexConv:
    def test_identity_kernel(self, rng):
        layer = ComplexConv2d(1, 1, 1, padding=0, seed=0)
        layer.weight.re.data[:] = 1.0
        layer.weight.im.data[:] = 0.0
        z = ComplexTensor(rng.standard_normal((2, 1, 4, 4)),
                          rng.standard_normal((2, 1, 4, 4)))
        out = layer(z)
        np.testing.assert_array_equal(out.re.data, z.re.data)
        np.testing.assert_array_equal(out.im.data, z.im.data)

    def test_i_kernel_rotates(self):
        layer = ComplexConv2d(1, 1, 1, padding=0, seed=0)
        layer.weight.re.data[:] = 0.0
        layer.weight.im.data[:] = 1.0
        z = ComplexTensor(np.full((1, 1, 1, 1), 1.0), np.full((1, 1, 1, 1), 2.0))
        out = layer(z)
        assert out.re.data.ravel()[0] == pytest.approx(-2.0)
        assert out.im.data.ravel()[0] == pytest.approx(1.0)

    def test_matches_quadruple_loop_oracle(self, rng):
        x_re = rng.standard_normal((2, 2, 5, 5))
        x_im = rng.standard_normal((2, 2, 5, 5))
        layer = ComplexConv2d(2, 3, 3, stride=1, padding=0, seed=5)
        expect_re, expect_im = naive_complex_conv(
            x_re, x_im, layer.weight.re.data, layer.weight.im.data)
        out = layer(ComplexTensor(x_re, x_im))
        np.testing.assert_allclose(out.re.data, expect_re, atol=1e-12)
        np.testing.assert_allclose(out.im.data, expect_im, atol=1e-12)

    def test_matches_oracle_with_stride_and_padding(self, rng):
        x_re = rng.standard_normal((1, 2, 6, 6))
        x_im = rng.standard_normal((1, 2, 6, 6))
        layer = ComplexConv2d(2, 2, 3, stride=2, padding=1, seed=6)
        expect_re, expect_im = naive_complex_conv(
            x_re, x_im, layer.weight.re.data, layer.weight.im.data,
            stride=2, pad=1)
        out = layer(ComplexTensor(x_re, x_im))
        np.testing.assert_allclose(out.re.data, expect_re, atol=1e-12)
        np.testing.assert_allclose(out.im.data, expect_im, atol=1e-12)

    def test_block_matrix_equivalence(self, rng):
        # Stack [re; im] as channels and convolve with [[A, -B], [B, A]]
        layer = ComplexConv2d(2, 3, 3, padding=1, seed=7)
        a, b = layer.weight.re.data, layer.weight.im.data
        big = np.block([[a, -b], [b, a]])  # (6, 4, 3, 3)
        x_re = rng.standard_normal((2, 2, 5, 5))
        x_im = rng.standard_normal((2, 2, 5, 5))
        stacked = Tensor(np.concatenate([x_re, x_im], axis=1))
        out_big = conv2d(stacked, Tensor(big), stride=1, padding=1).data
        out = layer(ComplexTensor(x_re, x_im))
        assert np.max(np.abs(out.re.data - out_big[:, :3])) < 1e-10
        assert np.max(np.abs(out.im.data - out_big[:, 3:])) < 1e-10

    def test_linear_in_input_and_kernel(self, rng):
        layer = ComplexConv2d(1, 1, 3, padding=1, bias=False, seed=8)
        z1 = ComplexTensor(rng.standard_normal((1, 1, 4, 4)),
                           rng.standard_normal((1, 1, 4, 4)))
        z2 = ComplexTensor(rng.standard_normal((1, 1, 4, 4)),
                           rng.standard_normal((1, 1, 4, 4)))
        lhs = layer(ComplexTensor(z1.re + z2.re, z1.im + z2.im))
        rhs_re = layer(z1).re + layer(z2).re
        rhs_im = layer(z1).im + layer(z2).im
        np.testing.assert_allclose(lhs.re.data, rhs_re.data, atol=1e-10)
        np.testing.assert_allclose(lhs.im.data, rhs_im.data, atol=1e-10)

    def test_conjugation_property(self, rng):
        layer = ComplexConv2d(2, 2, 3, padding=0, bias=False, seed=9)
        z = ComplexTensor(rng.standard_normal((1, 2, 4, 4)),
                          rng.standard_normal((1, 2, 4, 4)))
        out = layer(z)
        layer.weight.im.data *= -1  # conj W
        out_conj = layer(ComplexTensor(z.re, -z.im))
        np.testing.assert_allclose(out_conj.re.data, out.re.data, atol=1e-10)
        np.testing.assert_allclose(out_conj.im.data, -out.im.data, atol=1e-10)

    def test_channel_mismatch_rejected(self):
        layer = ComplexConv2d(2, 1, 3, seed=0)
        z = ComplexTensor(np.zeros((1, 3, 4, 4)), np.zeros((1, 3, 4, 4)))
        with pytest.raises(ValueError, match="channels"):
            layer(z)

    def test_too_small_output_rejected(self):
        layer = ComplexConv2d(1, 1, 3, padding=0, seed=0)
        z = ComplexTensor(np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 2, 2)))
        with pytest.raises(ValueError, match="output spatial"):
            layer(z)

    def test_gradients(self):
        errs = [gradcheck_conv(seed) for seed in range(30, 35)]
        assert max(errs) < 1e-4


class TestComplexDense:
    def test_identity(self, rng):
        layer = ComplexDense(3, 3, bias=False, seed=0)
        layer.weight.re.data[:] = np.eye(3)
        layer.weight.im.data[:] = 0.0
        v = ComplexTensor(rng.standard_normal((2, 3)), rng.standard_normal((2, 3)))
        out = layer(v)
        np.testing.assert_allclose(out.re.data, v.re.data, atol=1e-12)
        np.testing.assert_allclose(out.im.data, v.im.data, atol=1e-12)

    def test_i_matrix_twice_negates(self, rng):
        layer = ComplexDense(3, 3, bias=False, seed=0)
        layer.weight.re.data[:] = 0.0
        layer.weight.im.data[:] = np.eye(3)
        v = ComplexTensor(rng.standard_normal((2, 3)), rng.standard_normal((2, 3)))
        out = layer(layer(v))
        np.testing.assert_allclose(out.re.data, -v.re.data, atol=1e-12)
        np.testing.assert_allclose(out.im.data, -v.im.data, atol=1e-12)

    def test_block_matrix_oracle(self, rng):
        # Explicit 2m x 2n real block matrix [[A, -B], [B, A]]
        layer = ComplexDense(2, 3, bias=False, seed=4)
        a, b = layer.weight.re.data, layer.weight.im.data
        big = np.block([[a, -b], [b, a]])  # (6, 4)
        v_re = rng.standard_normal((5, 2))
        v_im = rng.standard_normal((5, 2))
        expect = np.concatenate([v_re, v_im], axis=1) @ big.T
        out = layer(ComplexTensor(v_re, v_im))
        np.testing.assert_allclose(out.re.data, expect[:, :3], atol=1e-12)
        np.testing.assert_allclose(out.im.data, expect[:, 3:], atol=1e-12)

    def test_dimension_mismatch(self):
        layer = ComplexDense(4, 2, seed=0)
        with pytest.raises(ValueError, match="features"):
            layer(ComplexTensor(np.zeros((1, 3)), np.zeros((1, 3))))

    def test_gradients(self):
        errs = [gradcheck_dense(seed) for seed in range(40, 45)]
        assert max(errs) < 1e-4


class TestPoolAndBridge:
    def test_constant_map_pools_to_value(self):
        z = ComplexTensor(np.full((2, 3, 4, 4), 1.5), np.full((2, 3, 4, 4), -2.5))
        out = global_avg_pool(z)
        np.testing.assert_allclose(out.re.data, np.full((2, 3), 1.5), atol=1e-12)
        np.testing.assert_allclose(out.im.data, np.full((2, 3), -2.5), atol=1e-12)

    def test_bridge_length(self, rng):
        v = ComplexTensor(rng.standard_normal((4, 2)), rng.standard_normal((4, 2)))
        out = head_bridge(v)
        assert out.data.shape == (4, 4)
        np.testing.assert_array_equal(out.data[:, :2], v.re.data)
        np.testing.assert_array_equal(out.data[:, 2:], v.im.data)

    def test_zeros_through_pool_and_bridge(self):
        z = ComplexTensor(np.zeros((1, 2, 3, 3)), np.zeros((1, 2, 3, 3)))
        out = head_bridge(global_avg_pool(z))
        assert not out.data.any()


class TestMultiplyCounts:
    def test_real_conv_example(self):
        layer = Conv2d(1, 1, 3, padding=0, seed=0)
        assert count_real_multiplies(layer, (8, 8)) == 9 * 36  # 6x6 valid output

    def test_complex_is_exactly_4x(self):
        real = Conv2d(1, 1, 3, padding=0, seed=0)
        cplx = ComplexConv2d(1, 1, 3, padding=0, seed=0)
        assert count_real_multiplies(cplx, (8, 8)) == 4 * count_real_multiplies(real, (8, 8))
        assert count_real_multiplies(cplx, (8, 8)) == 1296

    def test_one_pixel_complex_1x1(self):
        layer = ComplexConv2d(1, 1, 1, padding=0, seed=0)
        assert count_real_multiplies(layer, (1, 1)) == 4

    def test_dense_counts(self):
        assert count_real_multiplies(Dense(7, 5, seed=0)) == 35
        assert count_real_multiplies(ComplexDense(7, 5, seed=0)) == 4 * 35
