"""Complex batch normalization by 2x2 whitening, plus the naive ablation.

Scaling a centered complex unit by a single real factor cannot fix unequal
variances or correlation between its real and imaginary parts; the result
stays elliptical. Whitening instead left-multiplies the centered (re, im)
pair by the inverse square root of its 2x2 covariance

    V = [[Vrr, Vri], [Vri, Vii]],

which recircularizes the distribution exactly. For symmetric positive
definite 2x2 matrices both the square root and the inverse have closed
forms: with s = sqrt(det V) and t = sqrt(trace V + 2s),

    sqrt(V)   = (V + s I) / t,
    V^(-1/2)  = (1 / (s t)) * [[Vii + s, -Vri], [-Vri, Vrr + s]].

The learnable scale gamma is a symmetric 2x2 matrix with three degrees of
freedom and the shift beta is complex. gamma_rr and gamma_ii start at
1/sqrt(2) so the freshly normalized output has complex variance
Gamma = Vrr + Vii = 1; running averages use momentum 0.9 and start at
Vrr = Vii = 1/sqrt(2), Vri = 0, mean = 0.

The whitening path is differentiated exactly: batch statistics are built
from autograd ops, so the backward pass includes their dependence on the
input (including through the analytic inverse square root).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autograd import NanGuardError, Parameter, Tensor, lift
from .ctensor import ComplexTensor, from_channel_split, merge_channel_split
from .module import Module


@dataclass
class Cov2:
    """Per-channel 2x2 covariance entries (symmetric: vir == vri)."""
    vrr: float
    vri: float
    vii: float

    @property
    def vir(self):
        return self.vri

    def as_matrix(self):
        return np.array([[self.vrr, self.vri], [self.vri, self.vii]], dtype=np.float64)


def inv_sqrt_2x2(v, eps=0.0):
    """Analytic inverse square root of a symmetric PD 2x2 matrix (+ eps*I).

    Returns M with M @ (V + eps I) @ M == I. Raises if the regularized
    matrix is not positive definite (broken statistics upstream).
    """
    if isinstance(v, Cov2):
        v = v.as_matrix()
    v = np.asarray(v, dtype=np.float64)
    a = v[0, 0] + eps
    b = v[0, 1]
    c = v[1, 1] + eps
    if abs(v[0, 1] - v[1, 0]) > 1e-12 * max(1.0, abs(b)):
        raise ValueError(f"covariance not symmetric: {v}")
    det = a * c - b * b
    if det <= 0:
        raise ValueError(f"covariance not positive definite after eps: det={det}")
    s = np.sqrt(det)
    t = np.sqrt(a + c + 2.0 * s)
    if t == 0:
        raise ValueError("degenerate covariance: trace + 2 sqrt(det) == 0")
    st = s * t
    return np.array([[(c + s) / st, -b / st], [-b / st, (a + s) / st]])


def _whiten_coeffs(vrr, vri, vii):
    """Per-channel V^(-1/2) entries from (autograd or constant) stat tensors.

    Inputs must already include the Tikhonov eps on the diagonal.
    """
    det = vrr * vii - vri * vri
    s = det.sqrt()
    t = (vrr + vii + s * 2.0).sqrt()
    inv_st = 1.0 / (s * t)
    return (vii + s) * inv_st, -vri * inv_st, (vrr + s) * inv_st


def _stat_axes(shape):
    if len(shape) == 2:
        return (0,)
    if len(shape) == 4:
        return (0, 2, 3)
    raise ValueError(f"expected (N, C) or (N, C, H, W), got {shape}")


def _population(shape, axes):
    n = 1
    for a in axes:
        n *= shape[a]
    return n


def _check_finite(name, *arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise NanGuardError(f"non-finite batch statistics in {name}")


class ComplexBatchNorm(Module):
    """Whitening complex batch normalization over (N, C) or (N, C, H, W)."""

    def __init__(self, num_features, eps=1e-5, momentum=0.9, name="cbn"):
        super().__init__()
        self.num_features = num_features
        self.eps = eps
        self.momentum = momentum
        self.name = name
        rh = 1.0 / np.sqrt(2.0)
        self.gamma_rr = Parameter(np.full(num_features, rh), name=f"{name}.gamma_rr")
        self.gamma_ri = Parameter(np.zeros(num_features), name=f"{name}.gamma_ri")
        self.gamma_ii = Parameter(np.full(num_features, rh), name=f"{name}.gamma_ii")
        self.beta = Parameter(np.zeros(num_features), np.zeros(num_features),
                              name=f"{name}.beta")
        self.register_buffer("running_mean_re", np.zeros(num_features))
        self.register_buffer("running_mean_im", np.zeros(num_features))
        self.register_buffer("running_vrr", np.full(num_features, rh))
        self.register_buffer("running_vri", np.zeros(num_features))
        self.register_buffer("running_vii", np.full(num_features, rh))

    def _param_shape(self, ndim):
        return (1, self.num_features) + (1,) * (ndim - 2)

    def _batch_stats(self, z, axes):
        mu_re = z.re.mean(axis=axes, keepdims=True)
        mu_im = z.im.mean(axis=axes, keepdims=True)
        xc_re = z.re - mu_re
        xc_im = z.im - mu_im
        vrr = (xc_re * xc_re).mean(axis=axes, keepdims=True)
        vii = (xc_im * xc_im).mean(axis=axes, keepdims=True)
        vri = (xc_re * xc_im).mean(axis=axes, keepdims=True)
        return mu_re, mu_im, xc_re, xc_im, vrr, vri, vii

    def _update_running(self, mu_re, mu_im, vrr, vri, vii):
        m = self.momentum
        for buf, batch in ((self.running_mean_re, mu_re), (self.running_mean_im, mu_im),
                           (self.running_vrr, vrr), (self.running_vri, vri),
                           (self.running_vii, vii)):
            buf[...] = m * buf + (1.0 - m) * batch.data.reshape(-1)

    def forward(self, z):
        axes = _stat_axes(z.shape)
        pshape = self._param_shape(z.re.ndim)
        if self.training:
            if _population(z.shape, axes) < 2:
                raise ValueError(f"{self.name}: needs at least 2 samples per channel "
                                 f"to estimate statistics, got shape {z.shape}")
            mu_re, mu_im, xc_re, xc_im, vrr, vri, vii = self._batch_stats(z, axes)
            _check_finite(self.name, mu_re.data, vrr.data, vri.data, vii.data)
            self._update_running(mu_re, mu_im, vrr, vri, vii)
        else:
            mu_re = lift(self.running_mean_re.reshape(pshape))
            mu_im = lift(self.running_mean_im.reshape(pshape))
            vrr = lift(self.running_vrr.reshape(pshape))
            vri = lift(self.running_vri.reshape(pshape))
            vii = lift(self.running_vii.reshape(pshape))
            xc_re = z.re - mu_re
            xc_im = z.im - mu_im
        wrr, wri, wii = _whiten_coeffs(vrr + self.eps, vri, vii + self.eps)
        xt_re = wrr * xc_re + wri * xc_im
        xt_im = wri * xc_re + wii * xc_im
        g_rr = self.gamma_rr.re.reshape(pshape)
        g_ri = self.gamma_ri.re.reshape(pshape)
        g_ii = self.gamma_ii.re.reshape(pshape)
        out_re = g_rr * xt_re + g_ri * xt_im + self.beta.re.reshape(pshape)
        out_im = g_ri * xt_re + g_ii * xt_im + self.beta.im.reshape(pshape)
        return ComplexTensor(out_re, out_im)

    def whiten(self, z):
        """Pre-gamma whitened activations (training statistics, no update)."""
        axes = _stat_axes(z.shape)
        _, _, xc_re, xc_im, vrr, vri, vii = self._batch_stats(z, axes)
        wrr, wri, wii = _whiten_coeffs(vrr + self.eps, vri, vii + self.eps)
        return ComplexTensor(wrr * xc_re + wri * xc_im, wri * xc_re + wii * xc_im)

    def real_multiplies(self, in_hw):
        return 0, in_hw  # elementwise work is ignored in the FLOP model


class NaiveComplexBatchNorm(Module):
    """Ablation variant: centers, then divides by sqrt of the complex
    variance Gamma = Vrr + Vii. No decorrelation of re/im, so elliptical
    inputs stay elliptical."""

    def __init__(self, num_features, eps=1e-5, momentum=0.9, name="ncbn"):
        super().__init__()
        self.num_features = num_features
        self.eps = eps
        self.momentum = momentum
        self.name = name
        rh = 1.0 / np.sqrt(2.0)
        self.gamma = Parameter(np.ones(num_features), name=f"{name}.gamma")
        self.beta = Parameter(np.zeros(num_features), np.zeros(num_features),
                              name=f"{name}.beta")
        self.register_buffer("running_mean_re", np.zeros(num_features))
        self.register_buffer("running_mean_im", np.zeros(num_features))
        self.register_buffer("running_vrr", np.full(num_features, rh))
        self.register_buffer("running_vii", np.full(num_features, rh))

    def forward(self, z):
        axes = _stat_axes(z.shape)
        pshape = (1, self.num_features) + (1,) * (z.re.ndim - 2)
        if self.training:
            if _population(z.shape, axes) < 2:
                raise ValueError(f"{self.name}: needs at least 2 samples per channel")
            mu_re = z.re.mean(axis=axes, keepdims=True)
            mu_im = z.im.mean(axis=axes, keepdims=True)
            xc_re = z.re - mu_re
            xc_im = z.im - mu_im
            vrr = (xc_re * xc_re).mean(axis=axes, keepdims=True)
            vii = (xc_im * xc_im).mean(axis=axes, keepdims=True)
            _check_finite(self.name, mu_re.data, vrr.data, vii.data)
            m = self.momentum
            for buf, batch in ((self.running_mean_re, mu_re), (self.running_mean_im, mu_im),
                               (self.running_vrr, vrr), (self.running_vii, vii)):
                buf[...] = m * buf + (1.0 - m) * batch.data.reshape(-1)
        else:
            mu_re = lift(self.running_mean_re.reshape(pshape))
            mu_im = lift(self.running_mean_im.reshape(pshape))
            vrr = lift(self.running_vrr.reshape(pshape))
            vii = lift(self.running_vii.reshape(pshape))
            xc_re = z.re - mu_re
            xc_im = z.im - mu_im
        inv_std = 1.0 / (vrr + vii + self.eps).sqrt()
        g = self.gamma.re.reshape(pshape)
        return ComplexTensor(g * xc_re * inv_std + self.beta.re.reshape(pshape),
                             g * xc_im * inv_std + self.beta.im.reshape(pshape))

    def real_multiplies(self, in_hw):
        return 0, in_hw


class RealBatchNorm(Module):
    """Standard per-channel batch normalization for real tensors."""

    def __init__(self, num_features, eps=1e-5, momentum=0.9, name="bn"):
        super().__init__()
        self.num_features = num_features
        self.eps = eps
        self.momentum = momentum
        self.name = name
        self.gamma = Parameter(np.ones(num_features), name=f"{name}.gamma")
        self.beta = Parameter(np.zeros(num_features), name=f"{name}.beta")
        self.register_buffer("running_mean", np.zeros(num_features))
        self.register_buffer("running_var", np.ones(num_features))

    def forward(self, x):
        axes = _stat_axes(x.shape)
        pshape = (1, self.num_features) + (1,) * (x.ndim - 2)
        if self.training:
            if _population(x.shape, axes) < 2:
                raise ValueError(f"{self.name}: needs at least 2 samples per channel")
            mu = x.mean(axis=axes, keepdims=True)
            xc = x - mu
            var = (xc * xc).mean(axis=axes, keepdims=True)
            _check_finite(self.name, mu.data, var.data)
            m = self.momentum
            self.running_mean[...] = m * self.running_mean + (1 - m) * mu.data.reshape(-1)
            self.running_var[...] = m * self.running_var + (1 - m) * var.data.reshape(-1)
        else:
            mu = lift(self.running_mean.reshape(pshape))
            var = lift(self.running_var.reshape(pshape))
            xc = x - mu
        xt = xc / (var + self.eps).sqrt()
        return self.gamma.re.reshape(pshape) * xt + self.beta.re.reshape(pshape)

    def real_multiplies(self, in_hw):
        return 0, in_hw


class PlanewiseBatchNorm(Module):
    """Regular BN applied separately to the re and im planes (the BN(C)
    hybrid of the ablations)."""

    def __init__(self, num_features, eps=1e-5, momentum=0.9, name="pbn"):
        super().__init__()
        self.bn_re = RealBatchNorm(num_features, eps, momentum, name=f"{name}.re")
        self.bn_im = RealBatchNorm(num_features, eps, momentum, name=f"{name}.im")

    def forward(self, z):
        return ComplexTensor(self.bn_re(z.re), self.bn_im(z.im))

    def real_multiplies(self, in_hw):
        return 0, in_hw


class ChannelSplitComplexBatchNorm(Module):
    """Complex BN on a real tensor (the CBN(R) hybrid): the first half of
    the channels is treated as real parts, the second half as imaginary."""

    def __init__(self, num_channels, eps=1e-5, momentum=0.9, name="cbnr"):
        super().__init__()
        if num_channels % 2 != 0:
            raise ValueError(f"channel-split CBN needs an even channel count, got {num_channels}")
        self.cbn = ComplexBatchNorm(num_channels // 2, eps, momentum, name=name)

    def forward(self, x):
        z = ComplexTensor(x[:, :self.cbn.num_features], x[:, self.cbn.num_features:])
        return merge_channel_split(self.cbn(z))

    def real_multiplies(self, in_hw):
        return 0, in_hw


def covariance_condition(points):
    """Condition number of the empirical covariance of a (2, N) point cloud."""
    if not np.all(np.isfinite(points)):
        return np.inf
    cov = np.cov(points, bias=True)
    if not np.all(np.isfinite(cov)):
        return np.inf
    evals = np.linalg.eigvalsh(cov)
    if evals[0] <= 0:
        return np.inf
    return float(evals[-1] / evals[0])


def ellipticity_harness(n_points, n_layers, mode, seed, eps=0.0):
    """Condition-number trace of a point cloud under repeated random 2x2
    linear maps, re-standardized after every map.

    mode "full" whitens with the analytic inverse square root (condition
    returns to 1 every layer); mode "naive" centers and divides by the
    complex standard deviation, which leaves eccentricity untouched, so the
    cloud grows progressively more elliptical. Returns n_layers + 1 values:
    the standardized input first, then one per layer.
    """
    if n_points < 100:
        raise ValueError(f"need at least 100 points for stable statistics, got {n_points}")
    if mode not in ("naive", "full"):
        raise ValueError(f"mode must be 'naive' or 'full', got {mode!r}")
    rng = np.random.default_rng(seed)
    shaper = rng.standard_normal((2, 2))
    points = shaper @ rng.standard_normal((2, n_points))

    def standardize(pts):
        mu = pts.mean(axis=1, keepdims=True)
        centered = pts - mu
        cov = np.cov(centered, bias=True)
        if not np.all(np.isfinite(cov)):
            return np.full_like(pts, np.nan)
        if mode == "full":
            try:
                m = inv_sqrt_2x2(cov, eps)
            except ValueError:
                return np.full_like(pts, np.nan)
            return m @ centered
        gamma = cov[0, 0] + cov[1, 1]
        return centered / np.sqrt(gamma + eps)

    points = standardize(points)
    conditions = [covariance_condition(points)]
    for _ in range(n_layers):
        points = rng.standard_normal((2, 2)) @ points
        points = standardize(points)
        conditions.append(covariance_condition(points))
    return conditions
