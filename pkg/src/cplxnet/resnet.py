"""Complex (and matched real) convolutional residual network builder.

Three stages of pre-activation residual blocks (BN -> activation -> conv,
twice, plus the identity shortcut). Feature maps keep their shape within a
stage; at a stage boundary the block output is concatenated with a 1x1
convolution of itself (same filter count), doubling the channels, and then
spatially decimated by 2. Complex networks first learn an imaginary
component for the real input with a small real residual stack, then run a
Conv -> BN -> Activation stem; real networks use the same stem on the raw
input.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

from .activations import CReLU, ModReLU, ReLU, ZReLU, relu
from .autograd import concatenate, lift, pad_spatial
from .cbn import (ChannelSplitComplexBatchNorm, ComplexBatchNorm,
                  NaiveComplexBatchNorm, PlanewiseBatchNorm, RealBatchNorm)
from .conv import ComplexConv2d, Conv2d, Dense, global_avg_pool, head_bridge
from .ctensor import ComplexTensor
from .module import Module

COMPLEX_ACTIVATIONS = ("crelu", "zrelu", "modrelu")
NORM_IDS = ("cbn", "ncbn", "bn")

# (is_complex, start_filters, blocks_per_stage) at the ~1.7M parameter budget
NAMED_CONFIGS = {
    "CWS": (True, 12, 16),
    "CDN": (True, 10, 23),
    "CIB": (True, 11, 19),
    "RWS": (False, 18, 14),
    "RDN": (False, 14, 23),
    "RIB": (False, 16, 18),
}


@dataclass
class ModelSpec:
    """Declarative description of a classifier network."""

    variant: str = "WS"
    start_filters: int = 12
    blocks_per_stage: int = 16
    n_stages: int = 3
    activation: str = "crelu"
    norm: str = "cbn"
    n_classes: int = 10
    is_complex: bool = True
    input_channels: int = 3
    init_flavor: str = "unitary"
    init_criterion: str = "he"
    seed: int = 0

    def validate(self):
        problems = []
        if self.n_stages != 3:
            problems.append(f"n_stages must be 3, got {self.n_stages}")
        if self.start_filters < 1:
            problems.append(f"start_filters must be >= 1, got {self.start_filters}")
        if self.blocks_per_stage < 1:
            problems.append(f"blocks_per_stage must be >= 1, got {self.blocks_per_stage}")
        if self.n_classes < 2:
            problems.append(f"n_classes must be >= 2, got {self.n_classes}")
        if self.norm not in NORM_IDS:
            problems.append(f"norm must be one of {NORM_IDS}, got {self.norm!r}")
        if self.is_complex and self.activation not in COMPLEX_ACTIVATIONS:
            problems.append(f"complex model needs activation in {COMPLEX_ACTIVATIONS}, "
                            f"got {self.activation!r}")
        if not self.is_complex and self.activation != "relu":
            problems.append(f"real model uses 'relu', got {self.activation!r}")
        if not self.is_complex and self.norm == "cbn" and self.start_filters % 2 != 0:
            problems.append("hybrid CBN on a real model needs an even filter count")
        if not self.is_complex and self.norm == "ncbn":
            problems.append("naive complex BN is only defined for complex models")
        if problems:
            raise ValueError("invalid ModelSpec: " + "; ".join(problems))
        return self

    def to_dict(self):
        return asdict(self)

    @staticmethod
    def from_dict(d):
        return ModelSpec(**d)

    @staticmethod
    def named(name, **overrides):
        """One of the six budget configurations (CWS/CDN/CIB/RWS/RDN/RIB)."""
        key = name.upper()
        if key not in NAMED_CONFIGS:
            raise ValueError(f"unknown named config {name!r}; options: {sorted(NAMED_CONFIGS)}")
        is_complex, filters, blocks = NAMED_CONFIGS[key]
        spec = ModelSpec(variant=key[1:], start_filters=filters, blocks_per_stage=blocks,
                         is_complex=is_complex,
                         activation="crelu" if is_complex else "relu")
        for k, v in overrides.items():
            setattr(spec, k, v)
        return spec


def _make_norm(spec, channels, name):
    if spec.is_complex:
        if spec.norm == "cbn":
            return ComplexBatchNorm(channels, name=name)
        if spec.norm == "ncbn":
            return NaiveComplexBatchNorm(channels, name=name)
        return PlanewiseBatchNorm(channels, name=name)
    if spec.norm == "cbn":
        return ChannelSplitComplexBatchNorm(channels, name=name)
    return RealBatchNorm(channels, name=name)


def _make_activation(spec, channels, name):
    if not spec.is_complex:
        return ReLU()
    if spec.activation == "crelu":
        return CReLU()
    if spec.activation == "zrelu":
        return ZReLU()
    return ModReLU(channels, name=name)


def _make_conv(spec, in_c, out_c, k, seed, name):
    if spec.is_complex:
        return ComplexConv2d(in_c, out_c, k, padding="same", bias=False,
                             flavor=spec.init_flavor, criterion=spec.init_criterion,
                             seed=seed, name=name)
    return Conv2d(in_c, out_c, k, padding="same", bias=False,
                  criterion=spec.init_criterion, seed=seed, name=name)


def _decimate(t):
    """Stride-2 spatial subsampling, zero-padding odd sizes to even first."""
    def one(plane):
        h, w = plane.data.shape[2], plane.data.shape[3]
        if h % 2 or w % 2:
            plane = pad_spatial(plane, (0, h % 2), (0, w % 2))
        return plane[:, :, ::2, ::2]

    if isinstance(t, ComplexTensor):
        return ComplexTensor(one(t.re), one(t.im))
    return one(t)


def _cat_channels(a, b):
    if isinstance(a, ComplexTensor):
        return ComplexTensor(concatenate([a.re, b.re], axis=1),
                             concatenate([a.im, b.im], axis=1))
    return concatenate([a, b], axis=1)


class LearnImaginaryBlock(Module):
    """Real residual-style stack (BN -> ReLU -> Conv, twice) whose output
    becomes the imaginary component of the network input."""

    def __init__(self, in_channels, width, seed=0, name="imag"):
        super().__init__()
        self.bn1 = RealBatchNorm(in_channels, name=f"{name}.bn1")
        self.conv1 = Conv2d(in_channels, width, 3, padding="same", bias=False,
                            seed=seed, name=f"{name}.conv1")
        self.bn2 = RealBatchNorm(width, name=f"{name}.bn2")
        self.conv2 = Conv2d(width, in_channels, 3, padding="same", bias=False,
                            seed=seed + 1, name=f"{name}.conv2")

    def forward(self, x):
        y = self.conv1(relu(self.bn1(x)))
        y = self.conv2(relu(self.bn2(y)))
        return ComplexTensor(x, y)


def learn_imaginary_block(x, block):
    """Functional alias: lift a real batch into the complex plane."""
    return block(lift(x))


class ResidualBlock(Module):
    """Pre-activation residual block: x + conv(act(bn(conv(act(bn(x))))))."""

    def __init__(self, spec, channels, seed, name):
        super().__init__()
        self.norm1 = _make_norm(spec, channels, f"{name}.bn1")
        self.act1 = _make_activation(spec, channels, f"{name}.act1")
        self.conv1 = _make_conv(spec, channels, channels, 3, seed, f"{name}.conv1")
        self.norm2 = _make_norm(spec, channels, f"{name}.bn2")
        self.act2 = _make_activation(spec, channels, f"{name}.act2")
        self.conv2 = _make_conv(spec, channels, channels, 3, seed + 1, f"{name}.conv2")

    def forward(self, x):
        y = self.conv1(self.act1(self.norm1(x)))
        y = self.conv2(self.act2(self.norm2(y)))
        return x + y


class StageProjection(Module):
    """End-of-stage transition: concatenate the stage output with a 1x1
    convolution of it (same filter count), then subsample spatially by 2.
    Channels double, spatial size halves."""

    def __init__(self, spec, channels, seed, name):
        super().__init__()
        self.conv1x1 = _make_conv(spec, channels, channels, 1, seed, f"{name}.proj")

    def forward(self, x):
        return _decimate(_cat_channels(x, self.conv1x1(x)))

    def multiply_count(self, in_hw):
        count, _ = self.conv1x1.real_multiplies(in_hw)
        return count, ((in_hw[0] + 1) // 2, (in_hw[1] + 1) // 2)


def stage_projection(x, projection):
    """Functional alias for the projection module."""
    return projection(x)


class ResNetClassifier(Module):
    """The assembled network; forward maps a real image batch to class scores."""

    def __init__(self, spec):
        super().__init__()
        spec.validate()
        self.spec = spec
        f = spec.start_filters
        seed = spec.seed
        if spec.is_complex:
            self.imag = LearnImaginaryBlock(spec.input_channels, f, seed=seed * 1000 + 1)
            self.stem_conv = _make_conv(spec, spec.input_channels, f, 3,
                                        seed * 1000 + 3, "stem")
        else:
            self.imag = None
            self.stem_conv = _make_conv(spec, spec.input_channels, f, 3,
                                        seed * 1000 + 3, "stem")
        self.stem_norm = _make_norm(spec, f, "stem.bn")
        self.stem_act = _make_activation(spec, f, "stem.act")
        body = []
        channels = f
        s = seed * 1000 + 10
        for stage in range(spec.n_stages):
            for b in range(spec.blocks_per_stage):
                body.append(ResidualBlock(spec, channels, s, f"s{stage}.b{b}"))
                s += 2
            if stage < spec.n_stages - 1:
                body.append(StageProjection(spec, channels, s, f"s{stage}"))
                s += 1
                channels *= 2
        self.body = body
        self.final_norm = _make_norm(spec, channels, "final.bn")
        self.final_act = _make_activation(spec, channels, "final.act")
        head_in = 2 * channels if spec.is_complex else channels
        self.head = Dense(head_in, spec.n_classes, bias=True, criterion="glorot",
                          seed=s, name="head")

    def forward(self, x):
        x = lift(x)
        z = self.imag(x) if self.imag is not None else x
        z = self.stem_act(self.stem_norm(self.stem_conv(z)))
        for layer in self.body:
            z = layer(z)
        z = self.final_act(self.final_norm(z))
        v = global_avg_pool(z)
        if self.spec.is_complex:
            v = head_bridge(v)
        return self.head(v)


def build_model(spec):
    """Build an executable network from a validated ModelSpec."""
    return ResNetClassifier(spec)


def parameter_count(spec):
    return build_model(spec).num_params()
