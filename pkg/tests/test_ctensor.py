import numpy as np
import pytest

from cplxnet.ctensor import (ChannelSplitView, ComplexTensor,
                             complex_elementwise_mul, from_channel_split,
                             modulus, phase, to_channel_split)


def ct(re, im):
    return ComplexTensor(np.asarray(re, dtype=np.float64),
                         np.asarray(im, dtype=np.float64))


class TestElementwiseMul:
    def test_multiplicative_identity(self, rng):
        z = ct(rng.standard_normal(6), rng.standard_normal(6))
        one = ct(np.ones(6), np.zeros(6))
        out = complex_elementwise_mul(one, z)
        np.testing.assert_array_equal(out.re.data, z.re.data)
        np.testing.assert_array_equal(out.im.data, z.im.data)

    def test_i_times_1_plus_2i(self):
        out = complex_elementwise_mul(ct([0.0], [1.0]), ct([1.0], [2.0]))
        assert out.re.data[0] == pytest.approx(-2.0)
        assert out.im.data[0] == pytest.approx(1.0)

    def test_conjugate_product(self):
        out = complex_elementwise_mul(ct([3.0], [4.0]), ct([3.0], [-4.0]))
        assert out.re.data[0] == pytest.approx(25.0)
        assert out.im.data[0] == pytest.approx(0.0)

    def test_shape_mismatch_reports_both(self):
        with pytest.raises(ValueError, match=r"\(2,\).*\(3,\)"):
            complex_elementwise_mul(ct(np.zeros(2), np.zeros(2)),
                                    ct(np.zeros(3), np.zeros(3)))

    def test_commutative_and_associative(self, rng):
        shape = (4, 5)
        zs = [ct(rng.standard_normal(shape), rng.standard_normal(shape))
              for _ in range(3)]
        a, b, c = zs
        ab = complex_elementwise_mul(a, b)
        ba = complex_elementwise_mul(b, a)
        np.testing.assert_allclose(ab.re.data, ba.re.data, rtol=1e-12)
        np.testing.assert_allclose(ab.im.data, ba.im.data, rtol=1e-12)
        left = complex_elementwise_mul(ab, c)
        right = complex_elementwise_mul(a, complex_elementwise_mul(b, c))
        np.testing.assert_allclose(left.re.data, right.re.data,
                                   rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(left.im.data, right.im.data,
                                   rtol=1e-12, atol=1e-12)

    def test_matches_numpy_complex(self, rng):
        a = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        b = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        out = complex_elementwise_mul(ComplexTensor.from_numpy(a),
                                      ComplexTensor.from_numpy(b))
        np.testing.assert_allclose(out.numpy(), a * b, rtol=1e-12)


class TestChannelSplit:
    def test_four_channel_convention(self, rng):
        t = rng.standard_normal((2, 4, 3, 3))
        z = from_channel_split(t)
        np.testing.assert_array_equal(z.re.data, t[:, :2])
        np.testing.assert_array_equal(z.im.data, t[:, 2:])

    def test_two_channel_zeros(self):
        z = from_channel_split(np.zeros((1, 2, 2, 2)))
        assert not z.re.data.any() and not z.im.data.any()

    def test_roundtrip_bit_exact(self, rng):
        t = rng.standard_normal((3, 6, 2, 5))
        back = to_channel_split(from_channel_split(t))
        np.testing.assert_array_equal(back, t)

    def test_odd_channels_rejected(self):
        with pytest.raises(ValueError, match="even"):
            from_channel_split(np.zeros((1, 3, 2, 2)))

    def test_view_aliases_underlying(self):
        t = np.zeros((1, 2, 2, 2))
        view = ChannelSplitView(t)
        view.re[...] = 7.0
        assert t[0, 0, 0, 0] == 7.0  # relabeling, not a copy


class TestModulusPhase:
    def test_three_four_five(self):
        z = ct([3.0], [4.0])
        assert modulus(z)[0] == pytest.approx(5.0)
        assert phase(z)[0] == pytest.approx(np.arctan2(4.0, 3.0))

    def test_negative_real_axis(self):
        z = ct([-1.0], [0.0])
        assert modulus(z)[0] == pytest.approx(1.0)
        assert phase(z)[0] == pytest.approx(np.pi)

    def test_origin_phase_is_zero(self):
        z = ct([0.0], [0.0])
        assert modulus(z)[0] == 0.0
        assert phase(z)[0] == 0.0

    def test_modulus_squared_identity(self, rng):
        z = ct(rng.standard_normal((10, 10)), rng.standard_normal((10, 10)))
        np.testing.assert_allclose(modulus(z) ** 2,
                                   z.re.data ** 2 + z.im.data ** 2, rtol=1e-12)


def test_shape_mismatch_in_constructor():
    with pytest.raises(ValueError, match="mismatch"):
        ComplexTensor(np.zeros(2), np.zeros(3))
