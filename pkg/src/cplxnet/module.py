"""Minimal layer container: parameter registry, train/eval mode, state I/O."""

from __future__ import annotations

from collections import OrderedDict

import numpy as np

from .autograd import Parameter


class Module:
    """Base class for layers. Submodules and parameters are discovered by
    walking instance attributes (lists/tuples of modules included)."""

    def __init__(self):
        self.training = True

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def _children(self):
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix=""):
        for name, value in vars(self).items():
            if isinstance(value, Parameter):
                yield (f"{prefix}{name}", value)
        for name, child in self._children():
            yield from child.named_parameters(prefix=f"{prefix}{name}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def num_params(self):
        return sum(p.numel for p in self.parameters())

    def named_buffers(self, prefix=""):
        """Non-trainable state (e.g. batch-norm running statistics)."""
        for name in getattr(self, "_buffer_names", ()):
            yield (f"{prefix}{name}", getattr(self, name))
        for name, child in self._children():
            yield from child.named_buffers(prefix=f"{prefix}{name}.")

    def register_buffer(self, name, array):
        if not hasattr(self, "_buffer_names"):
            self._buffer_names = []
        self._buffer_names.append(name)
        setattr(self, name, np.asarray(array))

    def multiply_count(self, in_hw):
        """(real multiplies, output spatial size) for one example.

        Default: thread the spatial size through child modules in
        registration order, which matches forward order for the layers
        here. Elementwise work (norms, activations) counts as zero.
        """
        total = 0
        hw = in_hw
        for _, child in self._children():
            count, hw = child.multiply_count(hw)
            total += count
        return total, hw

    def train(self, mode=True):
        self.training = mode
        for _, child in self._children():
            child.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def state_arrays(self):
        """Flat name -> array mapping of all parameters (plane-suffixed)
        and buffers, in a stable order for serialization."""
        state = OrderedDict()
        for name, p in self.named_parameters():
            if p.is_complex:
                state[f"{name}.re"] = p.re.data
                state[f"{name}.im"] = p.im.data
            else:
                state[name] = p.re.data
        for name, buf in self.named_buffers():
            state[f"buffer:{name}"] = buf
        return state

    def load_state_arrays(self, state):
        """Inverse of state_arrays; copies values in place, checking shapes."""
        own = self.state_arrays()
        missing = set(own) - set(state)
        extra = set(state) - set(own)
        if missing or extra:
            raise ValueError(f"state mismatch: missing={sorted(missing)}, extra={sorted(extra)}")
        for name, arr in own.items():
            src = np.asarray(state[name])
            if src.shape != arr.shape:
                raise ValueError(f"shape mismatch for {name}: {src.shape} vs {arr.shape}")
            arr[...] = src.astype(arr.dtype)
