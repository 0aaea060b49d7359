"""Optimizers, learning-rate schedule, losses, metrics and the train loop.

Optimizers update every real scalar slot identically, whether it belongs to
a real parameter or to one plane of a complex one. Gradients are clipped to
a global L2 norm before each optimizer step; a NaN guard inspects the loss
and every gradient each step and aborts with the offending parameter path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autograd import (NanGuardError, Tensor, clip_gradient_norm, no_grad)
from .ctensor import ComplexTensor
from .module import Module


class SgdNesterov:
    """SGD with Nesterov momentum, lookahead form:

        v <- mu v - lr g
        p <- p + mu v - lr g
    """

    kind = "sgd_nesterov"

    def __init__(self, params, lr=0.1, momentum=0.9):
        if lr <= 0:
            raise ValueError("lr must be positive")
        self.params = list(params)
        self.lr = lr
        self.momentum = momentum
        self._velocity = [np.zeros_like(t.data) for p in self.params for t in p.tensors()]

    def _slots(self):
        i = 0
        for p in self.params:
            for t in p.tensors():
                yield i, t
                i += 1

    def step(self):
        mu = self.momentum
        for i, t in self._slots():
            g = t.grad if t.grad is not None else 0.0
            v = self._velocity[i]
            v *= mu
            v -= self.lr * g
            t.data += mu * v - self.lr * g

    def state_arrays(self):
        return {f"slot{i}": v for i, v in enumerate(self._velocity)}

    def load_state_arrays(self, state):
        for i, v in enumerate(self._velocity):
            v[...] = state[f"slot{i}"]

    def hyperparams(self):
        return {"lr": self.lr, "momentum": self.momentum}


class Adam:
    """Adam with bias correction; per real scalar component."""

    kind = "adam"

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        if lr <= 0:
            raise ValueError("lr must be positive")
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(t.data) for p in self.params for t in p.tensors()]
        self._v = [np.zeros_like(t.data) for p in self.params for t in p.tensors()]

    def _slots(self):
        i = 0
        for p in self.params:
            for t in p.tensors():
                yield i, t
                i += 1

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for i, t in self._slots():
            g = t.grad if t.grad is not None else np.zeros_like(t.data)
            m, v = self._m[i], self._v[i]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            t.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def state_arrays(self):
        state = {f"m{i}": m for i, m in enumerate(self._m)}
        state.update({f"v{i}": v for i, v in enumerate(self._v)})
        state["t"] = np.array([self.t], dtype=np.int64)
        return state

    def load_state_arrays(self, state):
        self.t = int(np.asarray(state["t"]).reshape(-1)[0])
        for i in range(len(self._m)):
            self._m[i][...] = state[f"m{i}"]
            self._v[i][...] = state[f"v{i}"]

    def hyperparams(self):
        return {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps}


@dataclass
class LrSchedule:
    """Piecewise-constant learning rate over epochs.

    `breakpoints` is a list of (start_epoch, lr) with strictly increasing
    starts beginning at 0; each rate applies until the next breakpoint.
    """

    breakpoints: list = field(default_factory=lambda: [(0, 0.1)])

    def __post_init__(self):
        if not self.breakpoints or self.breakpoints[0][0] != 0:
            raise ValueError("schedule must start at epoch 0")
        starts = [e for e, _ in self.breakpoints]
        if sorted(set(starts)) != starts:
            raise ValueError(f"breakpoint epochs must be strictly increasing, got {starts}")
        if any(lr <= 0 for _, lr in self.breakpoints):
            raise ValueError("learning rates must be positive")

    def lr_at(self, epoch):
        lr = self.breakpoints[0][1]
        for start, rate in self.breakpoints:
            if epoch >= start:
                lr = rate
        return lr


def lr_at(schedule, epoch):
    return schedule.lr_at(epoch)


def paper_lr_schedule():
    """Warm up at 0.01 for 10 epochs, 0.1 until 120, then anneal by 10x at
    epochs 120 and 150 (run ends at epoch 200)."""
    return LrSchedule([(0, 0.01), (10, 0.1), (120, 0.01), (150, 0.001)])


# -- losses ------------------------------------------------------------------

def cross_entropy(scores, labels):
    """Mean softmax cross-entropy from raw scores (fused, log-sum-exp
    stabilized). Labels are integer class indices."""
    from .autograd import accumulate, make_node

    labels = np.asarray(labels)
    n, k = scores.data.shape
    if labels.shape != (n,):
        raise ValueError(f"labels shape {labels.shape} does not match scores ({n},)")
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"label out of range [0, {k}): {labels.min()}..{labels.max()}")
    z = scores.data - scores.data.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -logp[np.arange(n), labels].mean()

    def bw(g):
        p = np.exp(logp)
        p[np.arange(n), labels] -= 1.0
        accumulate(scores, g * p / n)

    return make_node(np.asarray(loss), (scores,), bw)


def bce_multilabel(logits, targets):
    """Mean binary cross-entropy over independent sigmoid outputs."""
    from .autograd import accumulate, make_node

    targets = np.asarray(targets, dtype=np.float64)
    x = logits.data
    if targets.shape != x.shape:
        raise ValueError(f"targets shape {targets.shape} != logits shape {x.shape}")
    if targets.min() < 0 or targets.max() > 1:
        raise ValueError("targets must lie in [0, 1]")
    loss = (np.maximum(x, 0) - x * targets + np.log1p(np.exp(-np.abs(x)))).mean()

    def bw(g):
        sig = np.where(x >= 0, 1 / (1 + np.exp(-np.abs(x))),
                       np.exp(-np.abs(x)) / (1 + np.exp(-np.abs(x))))
        accumulate(logits, g * (sig - targets) / x.size)

    return make_node(np.asarray(loss), (logits,), bw)


def mse(pred, target):
    """Mean squared error over all elements."""
    from .autograd import lift
    target = lift(target)
    d = pred - target
    return (d * d).mean()


def mse_complex(pred, target_re, target_im):
    """MSE over both planes of a complex prediction (all real components)."""
    from .autograd import lift
    dre = pred.re - lift(target_re)
    dim = pred.im - lift(target_im)
    return ((dre * dre).sum() + (dim * dim).sum()) * (1.0 / (2 * pred.size))


# -- metrics -----------------------------------------------------------------

def average_precision(scores, labels):
    """Step-wise area under the precision-recall curve.

    Walks thresholds down the descending-score ranking (ties broken by
    input order) and sums precision * delta-recall at each positive.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 1 or scores.shape != labels.shape:
        raise ValueError("scores and labels must be 1-D and equally long")
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise ValueError("average precision needs at least one positive label")
    order = np.argsort(-scores, kind="stable")
    ranked = labels[order]
    tp = np.cumsum(ranked)
    precision = tp / np.arange(1, len(ranked) + 1)
    return float(precision[ranked.astype(bool)].sum() / n_pos)


def accuracy(scores, labels):
    scores = scores.data if isinstance(scores, Tensor) else np.asarray(scores)
    return float((scores.argmax(axis=1) == np.asarray(labels)).mean())


# -- FLOP accounting -----------------------------------------------------------

def model_flops(model, input_hw):
    """Total real multiplies per example at the given input spatial size."""
    total, _ = model.multiply_count(tuple(input_hw))
    return total


def flops_breakdown(model, input_hw):
    """Per-child (name, count) rows plus the grand total."""
    rows = []
    hw = tuple(input_hw)
    for name, child in model._children():
        count, hw = child.multiply_count(hw)
        rows.append((name, count))
    if isinstance(getattr(model, "body", None), list):
        pass  # body already covered by _children()
    return rows, sum(c for _, c in rows)


# -- the training loop ---------------------------------------------------------

def check_finite_grads(model):
    """NaN guard over parameter gradients; names the offending path."""
    for name, p in model.named_parameters():
        for plane, t in zip(("re", "im"), p.tensors()):
            if t.grad is not None and not np.all(np.isfinite(t.grad)):
                raise NanGuardError(f"non-finite gradient at {name}.{plane}")


@dataclass
class TrainResult:
    history: list
    best_epoch: int = -1
    best_metric: float = np.nan
    best_state: dict = None
    best_optimizer_state: dict = None
    aborted: bool = False
    abort_reason: str = ""


def iterate_minibatches(n, batch_size, rng):
    """Shuffled index batches; order is fully determined by the rng."""
    idx = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield idx[start:start + batch_size]


def train_loop(model, train_data, val_data, *, loss_fn, metric_fn, optimizer,
               schedule, epochs, batch_size=64, clip_norm=1.0, seed=0,
               higher_is_better=True, patience=None, start_epoch=0,
               step_hook=None, epoch_hook=None):
    """Generic minibatch training loop.

    `train_data`/`val_data` are (inputs, targets) tuples whose leading axis
    indexes examples (inputs may itself be a tuple of arrays, e.g. complex
    planes). `loss_fn(model, batch_inputs, batch_targets)` returns a scalar
    loss node; `metric_fn(model, data)` a float (model in eval mode).

    Per step: forward, backward, clip to `clip_norm`, then the optimizer
    update, in that order. Batch order is reshuffled each epoch from
    (seed, epoch), so runs and checkpoint resumes are reproducible. The
    best-validation model state is retained and returned.
    """
    history = []
    result = TrainResult(history=history)
    n = _num_examples(train_data)
    bad_epochs = 0
    for epoch in range(start_epoch, epochs):
        lr = schedule.lr_at(epoch)
        optimizer.lr = lr
        model.train()
        rng = np.random.default_rng([seed, epoch])
        epoch_losses = []
        try:
            for batch_idx in iterate_minibatches(n, batch_size, rng):
                xb = _take(train_data[0], batch_idx)
                yb = _take(train_data[1], batch_idx)
                model.zero_grad()
                loss = loss_fn(model, xb, yb)
                if not np.isfinite(loss.data):
                    raise NanGuardError(f"non-finite loss at epoch {epoch}")
                loss.backward()
                check_finite_grads(model)
                grads = [t.grad for p in model.parameters() for t in p.tensors()
                         if t.grad is not None]
                norm = clip_gradient_norm(grads, clip_norm)
                if step_hook is not None:
                    step_hook("clip", epoch, norm)
                optimizer.step()
                if step_hook is not None:
                    step_hook("step", epoch, norm)
                epoch_losses.append(float(loss.data))
        except NanGuardError as err:
            result.aborted = True
            result.abort_reason = str(err)
            history.append({"epoch": epoch, "lr": lr, "train_loss": np.nan,
                            "val_loss": np.nan, "metric": np.nan,
                            "flag": f"nan_guard: {err}"})
            return result
        model.eval()
        with no_grad():
            val_loss = float(loss_fn(model, val_data[0], val_data[1]).data)
            metric = metric_fn(model, val_data)
        row = {"epoch": epoch, "lr": lr,
               "train_loss": float(np.mean(epoch_losses)),
               "val_loss": val_loss, "metric": metric, "flag": ""}
        history.append(row)
        better = (result.best_state is None
                  or (metric > result.best_metric if higher_is_better
                      else metric < result.best_metric))
        if better:
            result.best_metric = metric
            result.best_epoch = epoch
            result.best_state = {k: v.copy() for k, v in model.state_arrays().items()}
            result.best_optimizer_state = {k: np.copy(v) for k, v in
                                           optimizer.state_arrays().items()}
            bad_epochs = 0
        else:
            bad_epochs += 1
        if epoch_hook is not None:
            epoch_hook(epoch, row, model, optimizer)
        if patience is not None and bad_epochs > patience:
            break
    return result


def _num_examples(data):
    inputs = data[0]
    if isinstance(inputs, tuple):
        return inputs[0].shape[0]
    return inputs.shape[0]


def _take(arrays, idx):
    if isinstance(arrays, tuple):
        return tuple(a[idx] for a in arrays)
    return arrays[idx]


# -- ready-made tasks ----------------------------------------------------------

def classification_loss(model, xb, yb):
    return cross_entropy(model(Tensor(xb)), yb)


def classification_metric(model, data, batch_size=256):
    xs, ys = data
    correct = 0
    with no_grad():
        for start in range(0, xs.shape[0], batch_size):
            scores = model(Tensor(xs[start:start + batch_size]))
            correct += int((scores.data.argmax(axis=1) == ys[start:start + batch_size]).sum())
    return correct / xs.shape[0]


def next_frame_loss(model, xb, yb):
    """Sequence prediction: xb = (seq_re, seq_im), yb = (frame_re, frame_im)."""
    seq_re, seq_im = xb
    pred = model(model.frames(seq_re, seq_im if model.complex_valued else None))
    if isinstance(pred, ComplexTensor):
        return mse_complex(pred, yb[0], yb[1])
    return mse(pred, yb[0])


def next_frame_mse(model, data, batch_size=64):
    xs, ys = data
    n = xs[0].shape[0]
    total = 0.0
    with no_grad():
        for start in range(0, n, batch_size):
            sl = slice(start, start + batch_size)
            xb = tuple(a[sl] for a in xs)
            yb = tuple(a[sl] for a in ys)
            loss = next_frame_loss(model, xb, yb)
            total += float(loss.data) * (xb[0].shape[0])
    return total / n
