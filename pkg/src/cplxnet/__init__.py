"""Complex-valued neural network building blocks.

Split-representation complex tensors, complex convolution and dense layers,
whitening complex batch normalization, Rayleigh/unitary initializers, the
modReLU/CReLU/zReLU activation family, complex residual networks and
convolutional LSTMs, plus a from-scratch reverse-mode autograd engine and a
training/experiment CLI.
"""

from .autograd import (NanGuardError, Parameter, Tensor, clip_gradient_norm,
                       finite_difference_grad, no_grad)
from .ctensor import (ChannelSplitView, ComplexTensor, complex_elementwise_mul,
                      from_channel_split, modulus, phase, to_channel_split)
from .activations import (cauchy_riemann_residual, crelu, modrelu,
                          phase_region_classifier, relu, sigmoid, tanh, zrelu)
from .cbn import (ComplexBatchNorm, Cov2, NaiveComplexBatchNorm, RealBatchNorm,
                  ellipticity_harness, inv_sqrt_2x2)
from .conv import (ComplexConv2d, ComplexDense, Conv2d, Dense,
                   count_real_multiplies, conv2d, global_avg_pool, head_bridge)
from .convlstm import ConvLstmCell, ConvLstmForecaster, unroll
from .init import (InitSpec, orthogonal_real_init, rayleigh_complex_init,
                   unitary_complex_init)
from .resnet import ModelSpec, ResNetClassifier, build_model
from .train import (Adam, LrSchedule, SgdNesterov, average_precision,
                    bce_multilabel, cross_entropy, lr_at, model_flops, mse,
                    paper_lr_schedule, train_loop)

__version__ = "0.1.0"
