"""Reverse-mode automatic differentiation over real numpy arrays.

Complex quantities never enter the graph as such: a complex value is a pair
of real tensors, and the gradient of a real loss with respect to a complex
parameter z = x + iy is read off as dL/dx + i dL/dy. Every graph node
therefore carries a plain real adjoint, and all activations (holomorphic or
not) backpropagate uniformly through their real and imaginary parts.

The tape is rebuilt on every forward pass (define-by-run); nodes record
their parents and a closure that pushes adjoint contributions upstream.
"""

from __future__ import annotations

import numpy as np

_FLOAT_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))

_grad_enabled = True


class NanGuardError(RuntimeError):
    """Raised when a non-finite value appears where the contract forbids one."""


class no_grad:
    """Context manager that skips tape construction (eval-mode forwards)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def grad_enabled():
    return _grad_enabled


def _as_float_array(data):
    arr = np.asarray(data)
    if arr.dtype not in _FLOAT_DTYPES:
        arr = arr.astype(np.float64)
    return arr


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def accumulate(t, g):
    """Add an adjoint contribution to tensor `t`, reducing broadcast axes."""
    g = _unbroadcast(np.asarray(g), t.data.shape)
    if t.grad is None:
        t.grad = g.astype(t.data.dtype, copy=True)
    else:
        t.grad += g


class Tensor:
    """A node on the tape: a real array plus an adjoint accumulator."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = _as_float_array(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    # -- basic introspection ------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        other = lift(other)
        out = make_node(self.data + other.data, (self, other),
                        lambda g: (accumulate(self, g), accumulate(other, g)))
        return out

    __radd__ = __add__

    def __neg__(self):
        return make_node(-self.data, (self,), lambda g: accumulate(self, -g))

    def __sub__(self, other):
        other = lift(other)
        return make_node(self.data - other.data, (self, other),
                         lambda g: (accumulate(self, g), accumulate(other, -g)))

    def __rsub__(self, other):
        return lift(other) - self

    def __mul__(self, other):
        other = lift(other)

        def bw(g):
            accumulate(self, g * other.data)
            accumulate(other, g * self.data)

        return make_node(self.data * other.data, (self, other), bw)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = lift(other)

        def bw(g):
            accumulate(self, g / other.data)
            accumulate(other, -g * self.data / (other.data * other.data))

        return make_node(self.data / other.data, (self, other), bw)

    def __rtruediv__(self, other):
        return lift(other) / self

    def __pow__(self, p):
        if not isinstance(p, (int, float)):
            raise TypeError("only scalar exponents are supported")

        def bw(g):
            accumulate(self, g * p * self.data ** (p - 1))

        return make_node(self.data ** p, (self,), bw)

    def exp(self):
        out_data = np.exp(self.data)
        return make_node(out_data, (self,), lambda g: accumulate(self, g * out_data))

    def log(self):
        return make_node(np.log(self.data), (self,),
                         lambda g: accumulate(self, g / self.data))

    def sqrt(self):
        out_data = np.sqrt(self.data)
        return make_node(out_data, (self,),
                         lambda g: accumulate(self, g * 0.5 / out_data))

    def __matmul__(self, other):
        other = lift(other)
        if self.data.ndim != 2 or other.data.ndim != 2:
            raise ValueError("matmul supports 2-D operands only")

        def bw(g):
            accumulate(self, g @ other.data.T)
            accumulate(other, self.data.T @ g)

        return make_node(self.data @ other.data, (self, other), bw)

    # -- reductions and shaping ----------------------------------------------

    def sum(self, axis=None, keepdims=False):
        out_data = self.data.sum(axis=axis, keepdims=keepdims)

        def bw(g):
            g = np.asarray(g)
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            accumulate(self, np.broadcast_to(g, self.data.shape))

        return make_node(out_data, (self,), bw)

    def mean(self, axis=None, keepdims=False):
        if axis is None:
            n = self.data.size
        else:
            ax = axis if isinstance(axis, tuple) else (axis,)
            n = 1
            for a in ax:
                n *= self.data.shape[a]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return make_node(self.data.reshape(shape), (self,),
                         lambda g: accumulate(self, g.reshape(self.data.shape)))

    def transpose(self, *axes):
        if not axes:
            axes = tuple(reversed(range(self.data.ndim)))
        elif len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inv = np.argsort(axes)
        return make_node(self.data.transpose(axes), (self,),
                         lambda g: accumulate(self, g.transpose(inv)))

    @property
    def T(self):
        return self.transpose()

    def __getitem__(self, idx):
        def bw(g):
            buf = np.zeros_like(self.data)
            buf[idx] += g
            accumulate(self, buf)

        return make_node(self.data[idx], (self,), bw)

    # -- backward pass --------------------------------------------------------

    def backward(self):
        """Reverse sweep from this (real scalar) node.

        Adjoints accumulate additively across fan-out; leaves keep their
        gradients until explicitly zeroed.
        """
        if self.data.size != 1:
            raise ValueError(f"backward() requires a scalar loss, got shape {self.data.shape}")
        order = _toposort(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)


def lift(x):
    """Wrap a number or array as a constant leaf tensor."""
    return x if isinstance(x, Tensor) else Tensor(x)


def make_node(data, parents, backward):
    """Build an op node with a hand-written backward closure.

    `backward(g)` receives the node's adjoint and must push contributions
    into each parent via `accumulate`. When grads are globally disabled the
    node is detached.
    """
    out = Tensor(data)
    if _grad_enabled:
        out._parents = tuple(p for p in parents if isinstance(p, Tensor))
        out._backward = backward
    return out


def _toposort(root):
    """Iterative DFS topological order; rejects cycles in hand-built graphs."""
    WHITE, GRAY, BLACK = 0, 1, 2
    state = {}
    order = []
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            state[id(node)] = BLACK
            order.append(node)
            continue
        c = state.get(id(node), WHITE)
        if c == BLACK:
            continue
        if c == GRAY:
            raise ValueError("cycle detected in computation tape")
        state[id(node)] = GRAY
        stack.append((node, True))
        for p in node._parents:
            pc = state.get(id(p), WHITE)
            if pc == GRAY:
                raise ValueError("cycle detected in computation tape")
            if pc == WHITE:
                stack.append((p, False))
    return order


def concatenate(tensors, axis=0):
    tensors = [lift(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            accumulate(t, g[tuple(sl)])

    return make_node(data, tensors, bw)


def pad_spatial(t, pad_h, pad_w):
    """Zero-pad the two trailing spatial axes of an (N, C, H, W) tensor."""
    ph0, ph1 = pad_h if isinstance(pad_h, tuple) else (pad_h, pad_h)
    pw0, pw1 = pad_w if isinstance(pad_w, tuple) else (pad_w, pad_w)
    data = np.pad(t.data, ((0, 0), (0, 0), (ph0, ph1), (pw0, pw1)))
    h, w = t.data.shape[2], t.data.shape[3]

    def bw(g):
        accumulate(t, g[:, :, ph0:ph0 + h, pw0:pw0 + w])

    return make_node(data, (t,), bw)


class Parameter:
    """A named trainable leaf: a complex pair of tensors, or a single real one.

    For a complex parameter z = x + iy the gradient is the pair
    (dL/dx, dL/dy); optimizers treat every real scalar slot identically.
    """

    def __init__(self, re, im=None, name=""):
        self.name = name
        self.re = Tensor(_as_float_array(re), requires_grad=True)
        self.im = Tensor(_as_float_array(im), requires_grad=True) if im is not None else None
        if self.im is not None and self.im.data.shape != self.re.data.shape:
            raise ValueError(
                f"parameter planes differ in shape: {self.re.data.shape} vs {self.im.data.shape}")

    @property
    def is_complex(self):
        return self.im is not None

    def tensors(self):
        return (self.re,) if self.im is None else (self.re, self.im)

    @property
    def numel(self):
        return sum(t.data.size for t in self.tensors())

    def zero_grad(self):
        for t in self.tensors():
            t.grad = None

    def grad_arrays(self):
        """Gradient arrays (zeros where no adjoint was recorded)."""
        return [t.grad if t.grad is not None else np.zeros_like(t.data)
                for t in self.tensors()]

    def __repr__(self):
        kind = "complex" if self.is_complex else "real"
        return f"Parameter({self.name!r}, {kind}, shape={self.re.data.shape})"


def finite_difference_grad(f, params, step=1e-3):
    """Central-difference gradient oracle.

    Perturbs every real scalar slot (real and imaginary planes alike) of
    every parameter by +-step, re-evaluating the zero-argument loss callable
    `f`. Returns one gradient array per plane, ordered as
    [p0.re, p0.im, p1.re, ...] with absent planes skipped. The estimate is
    (f(p+h) - f(p-h)) / (2h) and is independent of any backward pass.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    grads = []
    for p in params:
        for t in p.tensors():
            g = np.zeros_like(t.data)
            flat = t.data.reshape(-1)
            gflat = g.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + step
                fp = float(f())
                flat[i] = orig - step
                fm = float(f())
                flat[i] = orig
                if not (np.isfinite(fp) and np.isfinite(fm)):
                    raise NanGuardError(
                        f"non-finite loss while perturbing {p.name or 'param'}[{i}]")
                gflat[i] = (fp - fm) / (2.0 * step)
            grads.append(g)
    return grads


def global_grad_norm(grads):
    """L2 norm over every real scalar component of a list of arrays."""
    total = 0.0
    for g in grads:
        total += float(np.sum(np.asarray(g, dtype=np.float64) ** 2))
    return float(np.sqrt(total))


def clip_gradient_norm(grads, max_norm):
    """Scale `grads` in place so their global L2 norm is at most `max_norm`.

    Returns the pre-clip norm. Real and imaginary planes count alike; a
    non-finite norm trips the NaN guard before anything is touched.
    """
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    norm = global_grad_norm(grads)
    if not np.isfinite(norm):
        raise NanGuardError(f"gradient norm is non-finite ({norm})")
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads:
            g *= scale
    return norm
