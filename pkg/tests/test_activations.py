import numpy as np
import pytest

from cplxnet.activations import (REGION_CANCELED, REGION_PRESERVED,
                                 REGION_PROJECTED_IMAG, REGION_PROJECTED_REAL,
                                 cauchy_riemann_residual, crelu, modrelu,
                                 phase_region_classifier, relu,
                                 scalar_activation, sigmoid, tanh, zrelu)
from cplxnet.autograd import Tensor
from cplxnet.ctensor import ComplexTensor, modulus, phase
from cplxnet.verify import gradcheck_activation

from conftest import rel_err


def ct(re, im):
    return ComplexTensor(np.asarray(re, dtype=np.float64),
                         np.asarray(im, dtype=np.float64))


class TestCRelu:
    @pytest.mark.parametrize("z_in,z_out", [
        ((1.0, 2.0), (1.0, 2.0)),
        ((-1.0, 2.0), (0.0, 2.0)),
        ((-1.0, -2.0), (0.0, 0.0)),
    ])
    def test_pointwise(self, z_in, z_out):
        out = crelu(ct([z_in[0]], [z_in[1]]))
        assert (out.re.data[0], out.im.data[0]) == z_out

    def test_idempotent(self, rng):
        z = ct(rng.standard_normal(50), rng.standard_normal(50))
        once = crelu(z)
        twice = crelu(once)
        np.testing.assert_array_equal(once.re.data, twice.re.data)
        np.testing.assert_array_equal(once.im.data, twice.im.data)

    def test_output_phase_in_first_quadrant(self, rng):
        z = ct(rng.standard_normal(500), rng.standard_normal(500))
        out = crelu(z)
        nonzero = modulus(out) > 0
        ph = phase(out)[nonzero]
        assert np.all((ph >= 0) & (ph <= np.pi / 2))


class TestZRelu:
    @pytest.mark.parametrize("z_in,z_out", [
        ((1.0, 2.0), (1.0, 2.0)),     # first quadrant passes
        ((-1.0, 2.0), (0.0, 0.0)),    # phase > pi/2 canceled
        ((3.0, 0.0), (3.0, 0.0)),     # closed boundary at phase 0 passes
        ((0.0, 3.0), (0.0, 3.0)),     # closed boundary at pi/2 passes
    ])
    def test_pointwise(self, z_in, z_out):
        out = zrelu(ct([z_in[0]], [z_in[1]]))
        assert (out.re.data[0], out.im.data[0]) == z_out

    def test_boundary_backward_subgradient_zero(self):
        z = ComplexTensor(Tensor(np.array([3.0]), requires_grad=True),
                          Tensor(np.array([0.0]), requires_grad=True))
        out = zrelu(z)
        (out.re + out.im).sum().backward()
        assert z.re.grad[0] == 0.0  # on the axis: forward passes, grad 0
        assert z.im.grad[0] == 0.0

    def test_idempotent(self, rng):
        z = ct(rng.standard_normal(50), rng.standard_normal(50))
        once = zrelu(z)
        twice = zrelu(once)
        np.testing.assert_array_equal(once.re.data, twice.re.data)
        np.testing.assert_array_equal(once.im.data, twice.im.data)


class TestModRelu:
    def test_outside_dead_zone_scales(self):
        out = modrelu(ct([3.0], [4.0]), Tensor(np.array([-1.0])))
        assert out.re.data[0] == pytest.approx(2.4)
        assert out.im.data[0] == pytest.approx(3.2)

    def test_inside_dead_zone_zero(self):
        out = modrelu(ct([3.0], [4.0]), Tensor(np.array([-6.0])))
        assert out.re.data[0] == 0.0 and out.im.data[0] == 0.0

    def test_origin_maps_to_zero(self):
        out = modrelu(ct([0.0], [0.0]), Tensor(np.array([-0.5])))
        assert out.re.data[0] == 0.0 and out.im.data[0] == 0.0
        out = modrelu(ct([0.0], [0.0]), Tensor(np.array([0.5])))
        assert out.re.data[0] == 0.0 and out.im.data[0] == 0.0

    def test_phase_preserved(self, rng):
        z = ct(rng.standard_normal(200) * 2, rng.standard_normal(200) * 2)
        b = Tensor(np.array([-0.5]))
        out = modrelu(z, b)
        active = modulus(z) - 0.5 > 1e-9
        np.testing.assert_allclose(phase(out)[active], phase(z)[active],
                                   atol=1e-10)

    def test_positive_bias_keeps_whole_plane_active(self, rng):
        z = ct(rng.standard_normal(100), rng.standard_normal(100))
        out = modrelu(z, Tensor(np.array([0.7])))
        m = modulus(z)
        np.testing.assert_allclose(modulus(out), m + 0.7, atol=1e-12)


class TestRealActivations:
    def test_relu_subgradient_zero_at_kink(self):
        x = Tensor(np.array([0.0, -1.0, 2.0]), requires_grad=True)
        relu(x).sum().backward()
        np.testing.assert_array_equal(x.grad, [0.0, 0.0, 1.0])

    def test_sigmoid_tanh_values(self):
        x = Tensor(np.array([0.0, 100.0, -100.0]))
        np.testing.assert_allclose(sigmoid(x).data, [0.5, 1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(tanh(x).data, [0.0, 1.0, -1.0], atol=1e-12)

    def test_sigmoid_gradient(self, rng):
        x = Tensor(rng.standard_normal(20), requires_grad=True)
        sigmoid(x).sum().backward()
        s = 1 / (1 + np.exp(-x.data))
        np.testing.assert_allclose(x.grad, s * (1 - s), rtol=1e-12)


class TestCauchyRiemann:
    def test_square_is_holomorphic(self):
        f = lambda z: z * z
        assert cauchy_riemann_residual(f, 1 + 1j) < 1e-6

    def test_crelu_holomorphic_in_open_first_quadrant(self):
        f = scalar_activation("crelu")
        assert cauchy_riemann_residual(f, 1 + 2j) < 1e-6

    def test_crelu_violates_in_fourth_quadrant(self):
        # hand partials at 1 - 2i: du/dx = 1, dv/dy = 0 -> residual 1
        f = scalar_activation("crelu")
        assert cauchy_riemann_residual(f, 1 - 2j) == pytest.approx(1.0, abs=1e-6)

    def test_quadrant_sweep(self, rng):
        f = scalar_activation("crelu")
        for _ in range(100):
            r, i = rng.uniform(0.1, 3.0, size=2)
            assert cauchy_riemann_residual(f, complex(r, i)) < 1e-6       # I
            assert cauchy_riemann_residual(f, complex(-r, -i)) < 1e-6     # III
            assert cauchy_riemann_residual(f, complex(-r, i)) > 0.5       # II
            assert cauchy_riemann_residual(f, complex(r, -i)) > 0.5       # IV

    def test_nonfinite_samples_rejected(self):
        from cplxnet.autograd import NanGuardError
        f = lambda z: complex(np.inf, 0)
        with pytest.raises(NanGuardError):
            cauchy_riemann_residual(f, 1 + 1j)


class TestPhaseRegions:
    def test_crelu_regions(self):
        assert phase_region_classifier("crelu", 1 + 2j) == REGION_PRESERVED
        assert phase_region_classifier("crelu", -1 + 2j) == REGION_PROJECTED_IMAG
        assert phase_region_classifier("crelu", 1 - 2j) == REGION_PROJECTED_REAL
        assert phase_region_classifier("crelu", -1 - 2j) == REGION_CANCELED

    def test_zrelu_two_regions_only(self, rng):
        assert phase_region_classifier("zrelu", -1 + 2j) == REGION_CANCELED
        assert phase_region_classifier("zrelu", 1 + 2j) == REGION_PRESERVED
        for _ in range(50):
            z = complex(*rng.standard_normal(2))
            assert phase_region_classifier("zrelu", z) in (REGION_PRESERVED,
                                                           REGION_CANCELED)

    def test_modrelu_regions(self):
        assert phase_region_classifier("modrelu", 3 + 4j, b=-1.0) == REGION_PRESERVED
        assert phase_region_classifier("modrelu", 0.1 + 0.1j, b=-1.0) == REGION_CANCELED
        # nonnegative bias preserves the whole (punctured) plane
        assert phase_region_classifier("modrelu", -2 - 1j, b=0.5) == REGION_PRESERVED

    def test_unknown_id_rejected(self):
        with pytest.raises(ValueError, match="unknown activation"):
            phase_region_classifier("gelu", 1 + 1j)


class TestGradients:
    @pytest.mark.parametrize("name", ["crelu", "zrelu", "modrelu"])
    def test_matches_finite_differences_away_from_kinks(self, name):
        errs = [gradcheck_activation(name, seed) for seed in range(20, 25)]
        assert max(errs) < 1e-4
