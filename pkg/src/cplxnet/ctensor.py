"""Split-representation complex tensors.

A complex array is stored as two real planes (re, im) rather than
interleaved pairs, so real-valued kernels and reductions apply verbatim to
each plane. The planes are autograd tensors; wrap plain numpy arrays to use
ComplexTensor as an inert value type.
"""

from __future__ import annotations

import numpy as np

from .autograd import Tensor, concatenate, lift


class ComplexTensor:
    """Dense complex tensor as a (re, im) pair of identically shaped planes."""

    __slots__ = ("re", "im")

    def __init__(self, re, im):
        self.re = lift(re)
        self.im = lift(im)
        if self.re.data.shape != self.im.data.shape:
            raise ValueError(
                f"re/im shape mismatch: {self.re.data.shape} vs {self.im.data.shape}")

    @property
    def shape(self):
        return self.re.data.shape

    @property
    def size(self):
        return self.re.data.size

    @property
    def re_data(self):
        return self.re.data

    @property
    def im_data(self):
        return self.im.data

    def numpy(self):
        """Materialize as a numpy complex array (values only, no graph)."""
        return self.re.data + 1j * self.im.data

    def conj(self):
        return ComplexTensor(self.re, -self.im)

    def __add__(self, other):
        return ComplexTensor(self.re + other.re, self.im + other.im)

    def __sub__(self, other):
        return ComplexTensor(self.re - other.re, self.im - other.im)

    def __repr__(self):
        return f"ComplexTensor(shape={self.shape})"

    @staticmethod
    def zeros(shape, dtype=np.float64):
        return ComplexTensor(np.zeros(shape, dtype=dtype), np.zeros(shape, dtype=dtype))

    @staticmethod
    def from_numpy(z):
        z = np.asarray(z)
        return ComplexTensor(np.ascontiguousarray(z.real.astype(np.float64)),
                             np.ascontiguousarray(z.imag.astype(np.float64)))


class ChannelSplitView:
    """Relabeling of a real tensor's channel axis into complex planes.

    The first C/2 channels are the real parts, the last C/2 the imaginary
    parts. Both halves are views: mutating them mutates the underlying array.
    """

    def __init__(self, underlying, channel_axis=1):
        underlying = np.asarray(underlying)
        c = underlying.shape[channel_axis]
        if c % 2 != 0:
            raise ValueError(f"channel count must be even to split, got {c}")
        self.underlying = underlying
        self.channel_axis = channel_axis
        self.real_channels = range(0, c // 2)
        self.imag_channels = range(c // 2, c)
        lo = [slice(None)] * underlying.ndim
        hi = [slice(None)] * underlying.ndim
        lo[channel_axis] = slice(0, c // 2)
        hi[channel_axis] = slice(c // 2, c)
        self.re = underlying[tuple(lo)]
        self.im = underlying[tuple(hi)]


def complex_elementwise_mul(a, b):
    """Elementwise complex product of two equally shaped tensors."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return ComplexTensor(a.re * b.re - a.im * b.im,
                         a.im * b.re + a.re * b.im)


def from_channel_split(t, channel_axis=1):
    """Reinterpret an even-channel real tensor as complex (first half = re)."""
    view = ChannelSplitView(t, channel_axis)
    return ComplexTensor(view.re, view.im)


def to_channel_split(ct, channel_axis=1):
    """Inverse of from_channel_split: concatenate re then im along channels."""
    return np.concatenate([ct.re.data, ct.im.data], axis=channel_axis)


def merge_channel_split(ct, channel_axis=1):
    """Graph-op version of to_channel_split, returning an autograd tensor."""
    return concatenate([ct.re, ct.im], axis=channel_axis)


def modulus(t):
    """Elementwise |z| = sqrt(re^2 + im^2) as a plain array (no graph)."""
    return np.hypot(t.re.data, t.im.data)


def phase(t):
    """Elementwise arg(z) in (-pi, pi], with phase(0) defined as 0."""
    return np.arctan2(t.im.data, t.re.data)
