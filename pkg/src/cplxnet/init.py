"""Complex and real weight initializers.

A complex normal weight has Rayleigh-distributed magnitude, so its variance
is fully determined by the Rayleigh mode sigma: Var(W) = E|W|^2 = 2 sigma^2.
The Glorot criterion asks Var(W) = 2 / (n_in + n_out), i.e.
sigma = 1 / sqrt(n_in + n_out); the He criterion asks Var(W) = 2 / n_in,
i.e. sigma = 1 / sqrt(n_in). Phases are uniform on (-pi, pi), which keeps
E[W] = 0.

The (semi-)unitary flavor instead orthonormalizes the rows of a random
complex Gaussian matrix, reshapes it into the kernel tensor, and rescales
so the empirical variance hits the chosen criterion exactly; the real
orthogonal flavor is the same construction over the reals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ctensor import ComplexTensor

CRITERIA = ("glorot", "he")
FLAVORS = ("rayleigh_iid", "unitary", "orthogonal_real")


@dataclass
class InitSpec:
    criterion: str = "glorot"
    flavor: str = "unitary"
    fan_in: int = 1
    fan_out: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise ValueError(f"criterion must be one of {CRITERIA}, got {self.criterion!r}")
        if self.flavor not in FLAVORS:
            raise ValueError(f"flavor must be one of {FLAVORS}, got {self.flavor!r}")
        if self.fan_in < 1 or self.fan_out < 1:
            raise ValueError("fan_in and fan_out must be >= 1")

    @property
    def target_variance(self):
        if self.criterion == "glorot":
            return 2.0 / (self.fan_in + self.fan_out)
        return 2.0 / self.fan_in

    @property
    def rayleigh_sigma(self):
        # Var(W) = 2 sigma^2  =>  sigma = sqrt(target / 2)
        return np.sqrt(self.target_variance / 2.0)


def conv_fans(shape):
    """(fan_in, fan_out) for a kernel tensor (out_c, in_c, kh, kw)."""
    if len(shape) == 4:
        out_c, in_c, kh, kw = shape
        return in_c * kh * kw, out_c * kh * kw
    if len(shape) == 2:
        out_c, in_c = shape
        return in_c, out_c
    raise ValueError(f"expected a 2-D or 4-D kernel shape, got {shape}")


def rayleigh_complex_init(spec, shape):
    """I.i.d. complex weights: |W| ~ Rayleigh(sigma), phase ~ U(-pi, pi)."""
    if spec.flavor != "rayleigh_iid":
        raise ValueError(f"flavor mismatch: {spec.flavor}")
    rng = np.random.default_rng(spec.seed)
    mag = rng.rayleigh(scale=spec.rayleigh_sigma, size=shape)
    theta = rng.uniform(-np.pi, np.pi, size=shape)
    return ComplexTensor(mag * np.cos(theta), mag * np.sin(theta))


def _gram_schmidt_rows(m):
    """Modified Gram-Schmidt with one re-orthogonalization pass.

    Works for real and complex matrices; returns a matrix whose rows are
    orthonormal (requires n_rows <= n_cols). Raises on rank deficiency.
    """
    q = m.astype(m.dtype, copy=True)
    n_rows = q.shape[0]
    for _ in range(2):  # second sweep repairs float-level loss of orthogonality
        for i in range(n_rows):
            for j in range(i):
                q[i] -= (q[j].conj() @ q[i]) * q[j]
            norm = np.linalg.norm(q[i])
            if norm < 1e-12:
                raise np.linalg.LinAlgError("rank-deficient sample during orthonormalization")
            q[i] /= norm
    return q


def _semi_orthonormal(rng, n_rows, n_cols, complex_valued, max_tries=8):
    """Random matrix with orthonormal rows (or columns if n_rows > n_cols)."""
    for _ in range(max_tries):
        if complex_valued:
            m = (rng.standard_normal((n_rows, n_cols))
                 + 1j * rng.standard_normal((n_rows, n_cols))) / np.sqrt(2.0)
        else:
            m = rng.standard_normal((n_rows, n_cols))
        try:
            if n_rows <= n_cols:
                return _gram_schmidt_rows(m)
            return _gram_schmidt_rows(m.T).T
        except np.linalg.LinAlgError:
            continue  # probability ~0; resample from the same stream
    raise np.linalg.LinAlgError("could not orthonormalize after resampling")


def _rescale_to_variance(w, target_var):
    """Force the empirical mean |w|^2 to equal target_var exactly."""
    emp = float(np.mean(np.abs(w) ** 2))
    return w * np.sqrt(target_var / emp)


def unitary_complex_init(spec, kernel_shape):
    """Semi-unitary kernel initializer.

    Draws a complex Gaussian (n_out, n_in*kh*kw) matrix, orthonormalizes it
    on its smaller side, reshapes row-major into the kernel tensor, and
    rescales to the Glorot/He target variance.
    """
    if spec.flavor != "unitary":
        raise ValueError(f"flavor mismatch: {spec.flavor}")
    kernel_shape = tuple(kernel_shape)
    rng = np.random.default_rng(spec.seed)
    n_rows = kernel_shape[0]
    n_cols = int(np.prod(kernel_shape[1:]))
    u = _semi_orthonormal(rng, n_rows, n_cols, complex_valued=True)
    w = _rescale_to_variance(u.reshape(kernel_shape), spec.target_variance)
    return ComplexTensor(np.ascontiguousarray(w.real), np.ascontiguousarray(w.imag))


def orthogonal_real_init(spec, kernel_shape):
    """Real analogue: row-orthonormal Gaussian matrix, rescaled to the
    criterion (He target 2/n_in corresponds to the usual gain of sqrt(2))."""
    if spec.flavor != "orthogonal_real":
        raise ValueError(f"flavor mismatch: {spec.flavor}")
    kernel_shape = tuple(kernel_shape)
    rng = np.random.default_rng(spec.seed)
    n_rows = kernel_shape[0]
    n_cols = int(np.prod(kernel_shape[1:]))
    q = _semi_orthonormal(rng, n_rows, n_cols, complex_valued=False)
    return _rescale_to_variance(q.reshape(kernel_shape), spec.target_variance)


def init_complex_kernel(flavor, criterion, kernel_shape, seed):
    """Dispatch helper used by the layer constructors."""
    fan_in, fan_out = conv_fans(kernel_shape)
    spec = InitSpec(criterion=criterion, flavor=flavor, fan_in=fan_in,
                    fan_out=fan_out, seed=seed)
    if flavor == "rayleigh_iid":
        return rayleigh_complex_init(spec, kernel_shape)
    if flavor == "unitary":
        return unitary_complex_init(spec, kernel_shape)
    raise ValueError(f"not a complex kernel flavor: {flavor!r}")


def init_real_kernel(criterion, kernel_shape, seed):
    fan_in, fan_out = conv_fans(kernel_shape)
    spec = InitSpec(criterion=criterion, flavor="orthogonal_real",
                    fan_in=fan_in, fan_out=fan_out, seed=seed)
    return orthogonal_real_init(spec, kernel_shape)
