"""Complex activation functions and a numerical Cauchy-Riemann checker.

modReLU keeps the input phase and gates on the magnitude; CReLU rectifies
the real and imaginary parts independently; zReLU passes the closed first
quadrant and zeroes everything else. None of them is holomorphic on the
whole plane, which is fine: backprop here differentiates with respect to the
real and imaginary parts independently.

Boundary conventions (forward / backward subgradient):
  - ReLU at 0: output 0, gradient 0.
  - zReLU on the positive real/imaginary axes: passes through, gradient 0
    (the Cauchy-Riemann equations fail exactly on that set).
  - modReLU at |z| + b = 0 and at z = 0: output 0, gradient 0.
"""

from __future__ import annotations

import cmath

import numpy as np

from .autograd import NanGuardError, Parameter, Tensor, accumulate, lift, make_node
from .ctensor import ComplexTensor
from .module import Module

REGION_PRESERVED = "preserved"
REGION_PROJECTED_REAL = "projected-to-real-axis"
REGION_PROJECTED_IMAG = "projected-to-imag-axis"
REGION_CANCELED = "canceled"

_mask_collector = None


class record_masks:
    """Collect the boolean gating pattern of every activation evaluated in
    the block. Finite-difference tests compare the patterns of the two
    perturbed forwards: a flip means the interval crossed a non-smooth set
    and that component's estimate is invalid."""

    def __init__(self):
        self.traces = None

    def __enter__(self):
        global _mask_collector
        self._prev = _mask_collector
        _mask_collector = []
        return self

    def __exit__(self, *exc):
        global _mask_collector
        self.traces = _mask_collector
        _mask_collector = self._prev
        return False

    def same_as(self, other):
        if len(self.traces) != len(other.traces):
            return False
        return all(np.array_equal(a, b) for a, b in zip(self.traces, other.traces))


def _note_mask(mask):
    if _mask_collector is not None:
        _mask_collector.append(mask.copy())


def relu(t):
    t = lift(t)
    mask = t.data > 0
    _note_mask(mask)
    return make_node(np.where(mask, t.data, 0.0), (t,),
                     lambda g: accumulate(t, g * mask))


def sigmoid(t):
    t = lift(t)
    x = t.data
    # split by sign to avoid exp overflow
    out_data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                        np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def bw(g):
        accumulate(t, g * out_data * (1.0 - out_data))

    return make_node(out_data, (t,), bw)


def tanh(t):
    t = lift(t)
    out_data = np.tanh(t.data)
    return make_node(out_data, (t,),
                     lambda g: accumulate(t, g * (1.0 - out_data * out_data)))


def crelu(z):
    """ReLU applied separately to the real and imaginary parts."""
    return ComplexTensor(relu(z.re), relu(z.im))


def _quadrant_component(x, y, take_x):
    """One output plane of zReLU: pass where x >= 0 and y >= 0."""
    fwd = (x.data >= 0) & (y.data >= 0)
    bwd = (x.data > 0) & (y.data > 0)
    if take_x:
        _note_mask(fwd)
    src = x if take_x else y

    def bw(g):
        accumulate(src, g * bwd)

    return make_node(np.where(fwd, src.data, 0.0), (x, y), bw)


def zrelu(z):
    """Identity on phases in the closed interval [0, pi/2], zero elsewhere."""
    return ComplexTensor(_quadrant_component(z.re, z.im, True),
                         _quadrant_component(z.re, z.im, False))


def _modrelu_scale(x, y, b):
    """The real gain (|z| + b) / |z| where active, 0 in the dead zone.

    b broadcasts against the planes (per-channel bias). The product with z
    is left to the caller so the product rule handles the z-dependence of
    the gain automatically; this op only owns d(gain)/d(x, y, b).
    """
    m = np.hypot(x.data, y.data)
    bb = np.broadcast_to(b.data, m.shape)
    active = (m + bb > 0) & (m > 0)
    _note_mask(active)
    m_safe = np.where(m > 0, m, 1.0)
    s = np.where(active, (m + bb) / m_safe, 0.0)

    def bw(g):
        common = np.where(active, g * bb / (m_safe ** 3), 0.0)
        accumulate(x, -common * x.data)
        accumulate(y, -common * y.data)
        accumulate(b, np.where(active, g / m_safe, 0.0))

    return make_node(s, (x, y, b), bw)


def modrelu(z, b):
    """Phase-preserving magnitude gate: (|z| + b) z / |z| outside a dead
    zone of radius -b (for b < 0); zero inside it and at the origin."""
    b = lift(b)
    s = _modrelu_scale(z.re, z.im, b)
    return ComplexTensor(s * z.re, s * z.im)


def csigmoid(z):
    """Sigmoid applied separately on the real and imaginary parts."""
    return ComplexTensor(sigmoid(z.re), sigmoid(z.im))


def ctanh(z):
    """Tanh applied separately on the real and imaginary parts."""
    return ComplexTensor(tanh(z.re), tanh(z.im))


class ReLU(Module):
    def forward(self, x):
        return relu(x)


class CReLU(Module):
    def forward(self, z):
        return crelu(z)


class ZReLU(Module):
    def forward(self, z):
        return zrelu(z)


class ModReLU(Module):
    """modReLU with one learnable bias per feature channel (initialized to 0,
    a neutral start: the gate is then the identity on magnitudes)."""

    def __init__(self, num_features, name="modrelu"):
        super().__init__()
        self.num_features = num_features
        self.b = Parameter(np.zeros(num_features), name=f"{name}.b")

    def forward(self, z):
        shape = (1, self.num_features) + (1,) * (z.re.ndim - 2)
        return modrelu(z, self.b.re.reshape(shape))


def scalar_activation(name, b=0.0):
    """A python-complex version of one activation, for pointwise probing."""
    if name == "crelu":
        return lambda z: complex(max(z.real, 0.0), max(z.imag, 0.0))
    if name == "zrelu":
        return lambda z: z if (z.real >= 0 and z.imag >= 0) else 0j
    if name == "modrelu":
        def f(z):
            m = abs(z)
            if m == 0 or m + b <= 0:
                return 0j
            return (m + b) * z / m
        return f
    raise ValueError(f"unknown activation id: {name!r}")


def cauchy_riemann_residual(f, z0, h=1e-6):
    """Central-difference residual of the Cauchy-Riemann equations at z0.

    For f = u + iv returns max(|du/dx - dv/dy|, |du/dy + dv/dx|); a value
    near zero means f is locally holomorphic at z0.
    """
    z0 = complex(z0)
    samples = [f(z0 + h), f(z0 - h), f(z0 + 1j * h), f(z0 - 1j * h)]
    if not all(cmath.isfinite(complex(s)) for s in samples):
        raise NanGuardError(f"non-finite sample of f near {z0}")
    fxp, fxm, fyp, fym = (complex(s) for s in samples)
    ux = (fxp.real - fxm.real) / (2 * h)
    vx = (fxp.imag - fxm.imag) / (2 * h)
    uy = (fyp.real - fym.real) / (2 * h)
    vy = (fyp.imag - fym.imag) / (2 * h)
    return max(abs(ux - vy), abs(uy + vx))


def phase_region_classifier(activation, z, b=0.0):
    """Label how an activation treats the point z.

    CReLU splits the plane into four regions (preserved / projected to one
    axis / canceled); zReLU and modReLU only ever preserve or cancel.
    """
    f = scalar_activation(activation, b)
    z = complex(z)
    out = f(z)
    if out == 0:
        return REGION_CANCELED
    if activation == "modrelu":
        return REGION_PRESERVED  # nonzero output is a positive rescale of z
    if out == z:
        return REGION_PRESERVED
    if out.imag == 0:
        return REGION_PROJECTED_REAL
    if out.real == 0:
        return REGION_PROJECTED_IMAG
    return REGION_PRESERVED
