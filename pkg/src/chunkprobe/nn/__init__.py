"""Minimal reverse-mode autodiff toolkit backing the VAE models."""

from .gradcheck import grad_check, relative_error
from .layers import Conv2DParams, LinearParams, init_conv, init_linear
from .ops import (clamp, conv2d, cosine_similarity, kl_standard_normal, linear,
                  max_margin, reparameterize, tanh, transposed_conv2d)
from .optim import AdamState, adam_step
from .tensor import Tensor, add, mean, narrow, parameter, reshape, scale, stack, tsum

__all__ = [
    "Tensor", "parameter", "add", "scale", "tsum", "mean", "reshape", "narrow", "stack",
    "conv2d", "transposed_conv2d", "linear", "tanh", "clamp", "cosine_similarity",
    "kl_standard_normal", "max_margin", "reparameterize",
    "Conv2DParams", "LinearParams", "init_conv", "init_linear",
    "AdamState", "adam_step", "grad_check", "relative_error",
]
