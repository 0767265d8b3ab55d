"""Minimal reverse-mode autodiff over numpy, sized for convolutional recurrent nets."""

from .blur import gaussian_blur, gaussian_kernel1d
from .conv import ConvSpec, conv2d, conv2d_transpose
from .gradcheck import directional_derivative, finite_diff_grad, relative_error
from .init import glorot_uniform, param_rng
from .ops import (abs_, add, concat_channels, elementwise, mean_all, mul, scale, sigmoid, slice_axis, slice_channels,
                  stack, sub, sum_all, tanh)
from .optim import AdamState, adam_step, clip_grad_norm
from .tensor import DEFAULT_DTYPE, DimensionError, Tensor, as_tensor, grad_enabled, no_grad, zeros

__all__ = [
    "AdamState", "ConvSpec", "DEFAULT_DTYPE", "DimensionError", "Tensor", "abs_", "adam_step", "add",
    "as_tensor", "clip_grad_norm", "concat_channels", "conv2d", "conv2d_transpose", "directional_derivative",
    "elementwise", "finite_diff_grad", "gaussian_blur", "gaussian_kernel1d", "glorot_uniform", "grad_enabled",
    "mean_all", "mul", "no_grad", "param_rng", "relative_error", "scale", "sigmoid", "slice_axis", "slice_channels", "stack",
    "sub", "sum_all", "tanh", "zeros",
]
