"""Real and complex convolutional LSTM cells.

The gates follow the usual LSTM recurrences with convolutions in place of
matrix products:

    i_t = sigmoid(W_xi * x_t + W_hi * h_{t-1} + b_i)
    f_t = sigmoid(W_xf * x_t + W_hf * h_{t-1} + b_f)
    c_t = f_t o c_{t-1} + i_t o tanh(W_xc * x_t + W_hc * h_{t-1} + b_c)
    o_t = sigmoid(W_xo * x_t + W_ho * h_{t-1} + b_o)
    h_t = o_t o tanh(c_t)

The complex cell swaps in complex convolutions while keeping the
elementwise products real-valued per part (re*re, im*im) and applying
sigmoid/tanh separately to the real and imaginary planes. No peepholes.
"""

from __future__ import annotations

import numpy as np

from .activations import csigmoid, ctanh, sigmoid, tanh
from .autograd import Parameter, Tensor, lift
from .conv import ComplexConv2d, Conv2d
from .ctensor import ComplexTensor
from .module import Module

GATES = ("i", "f", "c", "o")


def _hadamard(a, b):
    """Gate product: real elementwise multiply, applied per part."""
    if isinstance(a, ComplexTensor):
        return ComplexTensor(a.re * b.re, a.im * b.im)
    return a * b


class ConvLstmCell(Module):
    """One convolutional LSTM cell; state is the (c, h) tensor pair.

    The forget-gate bias starts at 1.0 per part (set forget_bias=0 for a
    strictly neutral start)."""

    def __init__(self, in_channels, hidden_channels, kernel_size=3,
                 complex_valued=False, forget_bias=1.0, criterion="glorot",
                 seed=0, name="convlstm"):
        super().__init__()
        self.in_channels = in_channels
        self.hidden_channels = hidden_channels
        self.kernel_size = kernel_size
        self.complex_valued = complex_valued
        s = seed * 100
        for idx, gate in enumerate(GATES):
            if complex_valued:
                wx = ComplexConv2d(in_channels, hidden_channels, kernel_size,
                                   padding="same", bias=False, flavor="unitary",
                                   criterion=criterion, seed=s + 2 * idx,
                                   name=f"{name}.wx{gate}")
                wh = ComplexConv2d(hidden_channels, hidden_channels, kernel_size,
                                   padding="same", bias=False, flavor="unitary",
                                   criterion=criterion, seed=s + 2 * idx + 1,
                                   name=f"{name}.wh{gate}")
                b0 = np.full(hidden_channels, forget_bias if gate == "f" else 0.0)
                bias = Parameter(b0.copy(), b0.copy(), name=f"{name}.b{gate}")
            else:
                wx = Conv2d(in_channels, hidden_channels, kernel_size,
                            padding="same", bias=False, criterion=criterion,
                            seed=s + 2 * idx, name=f"{name}.wx{gate}")
                wh = Conv2d(hidden_channels, hidden_channels, kernel_size,
                            padding="same", bias=False, criterion=criterion,
                            seed=s + 2 * idx + 1, name=f"{name}.wh{gate}")
                bias = Parameter(np.full(hidden_channels, forget_bias if gate == "f" else 0.0),
                                 name=f"{name}.b{gate}")
            setattr(self, f"wx{gate}", wx)
            setattr(self, f"wh{gate}", wh)
            setattr(self, f"b{gate}", bias)

    def zero_state(self, batch, hw):
        shape = (batch, self.hidden_channels, hw[0], hw[1])
        if self.complex_valued:
            return (ComplexTensor.zeros(shape), ComplexTensor.zeros(shape))
        return (Tensor(np.zeros(shape)), Tensor(np.zeros(shape)))

    def _add_bias(self, t, bias):
        shape = (1, self.hidden_channels, 1, 1)
        if self.complex_valued:
            return ComplexTensor(t.re + bias.re.reshape(shape),
                                 t.im + bias.im.reshape(shape))
        return t + bias.re.reshape(shape)

    def _gate(self, gate, x_t, h_prev):
        wx = getattr(self, f"wx{gate}")
        wh = getattr(self, f"wh{gate}")
        pre = wx(x_t) + wh(h_prev)
        return self._add_bias(pre, getattr(self, f"b{gate}"))

    def step(self, x_t, state):
        """One time step; returns (h_t, (c_t, h_t))."""
        c_prev, h_prev = state
        if x_t.shape[1] != self.in_channels:
            raise ValueError(f"input has {x_t.shape[1]} channels, cell expects "
                             f"{self.in_channels}")
        if c_prev.shape != h_prev.shape:
            raise ValueError(f"state shapes differ: {c_prev.shape} vs {h_prev.shape}")
        sig = csigmoid if self.complex_valued else sigmoid
        th = ctanh if self.complex_valued else tanh
        i_t = sig(self._gate("i", x_t, h_prev))
        f_t = sig(self._gate("f", x_t, h_prev))
        g_t = th(self._gate("c", x_t, h_prev))
        o_t = sig(self._gate("o", x_t, h_prev))
        c_t = _hadamard(f_t, c_prev) + _hadamard(i_t, g_t)
        h_t = _hadamard(o_t, th(c_t))
        return h_t, (c_t, h_t)

    def forward(self, x_t, state):
        return self.step(x_t, state)

    def multiply_count(self, in_hw):
        total = 0
        for gate in GATES:
            total += getattr(self, f"wx{gate}").real_multiplies(in_hw)[0]
            total += getattr(self, f"wh{gate}").real_multiplies(in_hw)[0]
        return total, in_hw


def unroll(cell, sequence, state=None):
    """Run the cell over a nonempty list of frames from a zero (or given)
    initial state; returns (list of h_t, final state)."""
    if len(sequence) == 0:
        raise ValueError("cannot unroll an empty sequence")
    first = sequence[0]
    if state is None:
        batch = first.shape[0]
        hw = (first.shape[2], first.shape[3])
        state = cell.zero_state(batch, hw)
    outputs = []
    for x_t in sequence:
        h_t, state = cell.step(x_t, state)
        outputs.append(h_t)
    return outputs, state


class ConvLstmForecaster(Module):
    """Next-frame predictor: ConvLSTM over the input frames, then a 1x1
    convolution from the last hidden state back to frame channels."""

    def __init__(self, in_channels=1, feature_maps=8, kernel_size=3,
                 complex_valued=True, seq_len=5, seed=0):
        super().__init__()
        self.complex_valued = complex_valued
        self.seq_len = seq_len
        self.cell = ConvLstmCell(in_channels, feature_maps, kernel_size,
                                 complex_valued=complex_valued, seed=seed)
        if complex_valued:
            self.readout = ComplexConv2d(feature_maps, in_channels, 1, padding=0,
                                         bias=True, flavor="unitary",
                                         criterion="glorot", seed=seed + 7,
                                         name="readout")
        else:
            self.readout = Conv2d(feature_maps, in_channels, 1, padding=0,
                                  bias=True, criterion="glorot", seed=seed + 7,
                                  name="readout")

    def frames(self, seq_re, seq_im=None):
        """Split (N, T, C, H, W) arrays into per-step inputs."""
        t_len = seq_re.shape[1]
        out = []
        for t in range(t_len):
            if self.complex_valued:
                out.append(ComplexTensor(seq_re[:, t], seq_im[:, t]))
            else:
                out.append(Tensor(seq_re[:, t]))
        return out

    def forward(self, sequence):
        outputs, _ = unroll(self.cell, sequence)
        return self.readout(outputs[-1])

    def multiply_count(self, in_hw):
        step, _ = self.cell.multiply_count(in_hw)
        head, _ = self.readout.real_multiplies(in_hw)
        return self.seq_len * step + head, in_hw
