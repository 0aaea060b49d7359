"""Complex 2D convolution, dense transforms, pooling and the real head bridge.

A complex filter W = A + iB applied to h = x + iy decomposes into four real
convolutions: Re = A*x - B*y, Im = B*x + A*y. The real convolution is
cross-correlation (deep-learning convention) implemented with im2col plus a
matmul; the complex layer shares one im2col per input plane by stacking A
and B along the output-channel axis.
"""

from __future__ import annotations

import numpy as np

from .autograd import Parameter, Tensor, accumulate, concatenate, lift, make_node
from .ctensor import ComplexTensor
from .init import init_complex_kernel, init_real_kernel
from .module import Module


def _conv_out_size(h, w, kh, kw, stride, ph, pw):
    oh = (h + 2 * ph - kh) // stride + 1
    ow = (w + 2 * pw - kw) // stride + 1
    return oh, ow


def _resolve_padding(padding, kernel_size):
    if padding == "same":
        if kernel_size % 2 == 0:
            raise ValueError(f"'same' padding requires an odd kernel, got {kernel_size}")
        return kernel_size // 2
    return int(padding)


def _im2col(x, kh, kw, stride, ph, pw):
    """(N, C, H, W) -> (N, C*kh*kw, OH*OW) patch matrix (copies)."""
    n, c, h, w = x.shape
    oh, ow = _conv_out_size(h, w, kh, kw, stride, ph, pw)
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    s0, s1, s2, s3 = xp.strides
    view = np.lib.stride_tricks.as_strided(
        xp, (n, c, kh, kw, oh, ow), (s0, s1, s2, s3, s2 * stride, s3 * stride))
    return np.ascontiguousarray(view).reshape(n, c * kh * kw, oh * ow), (oh, ow)

def _col2im(dcols, x_shape, kh, kw, stride, ph, pw):
    """Scatter-add patch gradients back to the (N, C, H, W) input."""
    n, c, h, w = x_shape
    oh, ow = _conv_out_size(h, w, kh, kw, stride, ph, pw)
    dxp = np.zeros((n, c, h + 2 * ph, w + 2 * pw), dtype=dcols.dtype)
    d6 = dcols.reshape(n, c, kh, kw, oh, ow)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i:i + stride * oh:stride, j:j + stride * ow:stride] += d6[:, :, i, j]
    return dxp[:, :, ph:ph + h, pw:pw + w]


def conv2d(x, w, stride=1, padding=0):
    """Real 2-D cross-correlation of (N, C, H, W) with kernels (F, C, kh, kw)."""
    x, w = lift(x), lift(w)
    n, c, h, hw = x.data.shape
    f, cw, kh, kw = w.data.shape
    if c != cw:
        raise ValueError(f"input has {c} channels but kernel expects {cw}")
    ph = pw = padding
    oh, ow = _conv_out_size(h, hw, kh, kw, stride, ph, pw)
    if oh < 1 or ow < 1:
        raise ValueError(f"output spatial size {oh}x{ow} < 1 for input {h}x{hw}, "
                         f"kernel {kh}x{kw}, stride {stride}, padding {padding}")
    cols, _ = _im2col(x.data, kh, kw, stride, ph, pw)
    wmat = w.data.reshape(f, c * kh * kw)
    out = np.matmul(wmat, cols).reshape(n, f, oh, ow)

    def bw(g):
        gmat = g.reshape(n, f, oh * ow)
        accumulate(w, np.matmul(gmat, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.data.shape))
        dcols = np.matmul(wmat.T, gmat)
        accumulate(x, _col2im(dcols, x.data.shape, kh, kw, stride, ph, pw))

    return make_node(out, (x, w), bw)


class Conv2d(Module):
    """Real convolution layer, orthogonally initialized."""

    def __init__(self, in_channels, out_channels, kernel_size, stride=1,
                 padding="same", bias=False, criterion="he", seed=0, name="conv"):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = _resolve_padding(padding, kernel_size)
        shape = (out_channels, in_channels, kernel_size, kernel_size)
        self.weight = Parameter(init_real_kernel(criterion, shape, seed), name=f"{name}.w")
        self.bias = Parameter(np.zeros(out_channels), name=f"{name}.b") if bias else None

    def forward(self, x):
        out = conv2d(x, self.weight.re, stride=self.stride, padding=self.padding)
        if self.bias is not None:
            out = out + self.bias.re.reshape(1, -1, 1, 1)
        return out

    def real_multiplies(self, in_hw):
        oh, ow = _conv_out_size(in_hw[0], in_hw[1], self.kernel_size, self.kernel_size,
                                self.stride, self.padding, self.padding)
        k2 = self.kernel_size * self.kernel_size
        return self.out_channels * self.in_channels * k2 * oh * ow, (oh, ow)

    multiply_count = real_multiplies


class ComplexConv2d(Module):
    """Complex convolution layer storing the kernel as planes (A, B)."""

    def __init__(self, in_channels, out_channels, kernel_size, stride=1,
                 padding="same", bias=False, flavor="unitary", criterion="glorot",
                 seed=0, name="cconv"):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = _resolve_padding(padding, kernel_size)
        shape = (out_channels, in_channels, kernel_size, kernel_size)
        k = init_complex_kernel(flavor, criterion, shape, seed)
        self.weight = Parameter(k.re.data, k.im.data, name=f"{name}.w")
        self.bias = (Parameter(np.zeros(out_channels), np.zeros(out_channels),
                               name=f"{name}.b") if bias else None)

    def forward(self, z):
        if z.shape[1] != self.in_channels:
            raise ValueError(f"input has {z.shape[1]} complex channels, "
                             f"layer expects {self.in_channels}")
        f = self.out_channels
        # one im2col per input plane: convolve each plane with [A; B] stacked
        ab = concatenate([self.weight.re, self.weight.im], axis=0)
        cx = conv2d(z.re, ab, stride=self.stride, padding=self.padding)
        cy = conv2d(z.im, ab, stride=self.stride, padding=self.padding)
        ax, bx = cx[:, :f], cx[:, f:]
        ay, by = cy[:, :f], cy[:, f:]
        out = ComplexTensor(ax - by, bx + ay)
        if self.bias is not None:
            out = ComplexTensor(out.re + self.bias.re.reshape(1, -1, 1, 1),
                                out.im + self.bias.im.reshape(1, -1, 1, 1))
        return out

    def real_multiplies(self, in_hw):
        oh, ow = _conv_out_size(in_hw[0], in_hw[1], self.kernel_size, self.kernel_size,
                                self.stride, self.padding, self.padding)
        k2 = self.kernel_size * self.kernel_size
        return 4 * self.out_channels * self.in_channels * k2 * oh * ow, (oh, ow)

    multiply_count = real_multiplies


class Dense(Module):
    """Real fully connected layer on (N, in) inputs."""

    def __init__(self, in_features, out_features, bias=True, criterion="glorot",
                 seed=0, name="dense"):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Parameter(init_real_kernel(criterion, (out_features, in_features), seed),
                                name=f"{name}.w")
        self.bias = Parameter(np.zeros(out_features), name=f"{name}.b") if bias else None

    def forward(self, x):
        out = x @ self.weight.re.T
        if self.bias is not None:
            out = out + self.bias.re.reshape(1, -1)
        return out

    def real_multiplies(self, in_hw=None):
        return self.in_features * self.out_features, in_hw

    multiply_count = real_multiplies


class ComplexDense(Module):
    """Complex fully connected layer: out = (A + iB)(x + iy)."""

    def __init__(self, in_features, out_features, bias=True, flavor="unitary",
                 criterion="glorot", seed=0, name="cdense"):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        k = init_complex_kernel(flavor, criterion, (out_features, in_features), seed)
        self.weight = Parameter(k.re.data, k.im.data, name=f"{name}.w")
        self.bias = (Parameter(np.zeros(out_features), np.zeros(out_features),
                               name=f"{name}.b") if bias else None)

    def forward(self, v):
        if v.shape[-1] != self.in_features:
            raise ValueError(f"input has {v.shape[-1]} features, layer expects {self.in_features}")
        a, b = self.weight.re, self.weight.im
        out = ComplexTensor(v.re @ a.T - v.im @ b.T,
                            v.re @ b.T + v.im @ a.T)
        if self.bias is not None:
            out = ComplexTensor(out.re + self.bias.re.reshape(1, -1),
                                out.im + self.bias.im.reshape(1, -1))
        return out

    def real_multiplies(self, in_hw=None):
        return 4 * self.in_features * self.out_features, in_hw

    multiply_count = real_multiplies


def complex_dense(v, weight_re, weight_im, bias=None):
    """Functional form of the complex matrix product (Eq.-style block algebra)."""
    a, b = lift(weight_re), lift(weight_im)
    out = ComplexTensor(v.re @ a.T - v.im @ b.T, v.re @ b.T + v.im @ a.T)
    if bias is not None:
        out = ComplexTensor(out.re + bias.re, out.im + bias.im)
    return out


def global_avg_pool(t):
    """Average over spatial positions, per channel and per plane."""
    if isinstance(t, ComplexTensor):
        if t.re.ndim != 4:
            raise ValueError(f"expected (N, C, H, W), got shape {t.shape}")
        return ComplexTensor(t.re.mean(axis=(2, 3)), t.im.mean(axis=(2, 3)))
    if t.ndim != 4:
        raise ValueError(f"expected (N, C, H, W), got shape {t.shape}")
    return t.mean(axis=(2, 3))


def head_bridge(v):
    """Concatenate [re ; im] of a complex feature vector into a real one."""
    return concatenate([v.re, v.im], axis=-1 if v.re.ndim == 1 else 1)


def count_real_multiplies(layer, in_hw=(1, 1)):
    """Real-multiply count of one layer at the given input spatial size.

    A complex convolution costs exactly 4x its same-geometry real
    counterpart (one complex multiply = four real multiplies).
    """
    count, _ = layer.real_multiplies(in_hw)
    return count
