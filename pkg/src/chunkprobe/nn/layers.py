"""Parameter containers and initialisation for the layers the models use."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor, parameter


@dataclass
class Conv2DParams:
    """Weights for a 2-D convolution (or its transpose).

    For a forward convolution the weight array is laid out
    [out_channels, in_channels, kh, kw]; for a transposed convolution it is
    [in_channels, out_channels, kh, kw].  Either way axis 0 matches the
    channel count of the map's input, which is what the kernels expect.
    """

    in_channels: int
    out_channels: int
    kernel: Tuple[int, int]
    stride: Tuple[int, int]
    weights: Tensor
    bias: Optional[Tensor]
    transposed: bool = False

    def __post_init__(self):
        kh, kw = self.kernel
        if min(self.in_channels, self.out_channels, kh, kw) < 1:
            raise ShapeError("conv params: channel and kernel sizes must be positive")
        if min(self.stride) < 1:
            raise ShapeError("conv params: stride must be positive")
        lead = (self.in_channels, self.out_channels) if self.transposed \
            else (self.out_channels, self.in_channels)
        want = lead + (kh, kw)
        if self.weights.shape != want:
            raise ShapeError(f"conv weights shape {self.weights.shape}, expected {want}")
        if self.bias is not None and self.bias.shape != (self.out_channels,):
            raise ShapeError(f"conv bias shape {self.bias.shape}, expected ({self.out_channels},)")

    def tensors(self) -> List[Tensor]:
        return [self.weights] + ([self.bias] if self.bias is not None else [])


@dataclass
class LinearParams:
    """Weights for an affine map x -> W x + b with W of shape [out, in]."""

    in_dim: int
    out_dim: int
    weights: Tensor
    bias: Optional[Tensor]

    def __post_init__(self):
        if min(self.in_dim, self.out_dim) < 1:
            raise ShapeError("linear params: dimensions must be positive")
        if self.weights.shape != (self.out_dim, self.in_dim):
            raise ShapeError(f"linear weights shape {self.weights.shape}, "
                             f"expected {(self.out_dim, self.in_dim)}")
        if self.bias is not None and self.bias.shape != (self.out_dim,):
            raise ShapeError(f"linear bias shape {self.bias.shape}, expected ({self.out_dim},)")

    def tensors(self) -> List[Tensor]:
        return [self.weights] + ([self.bias] if self.bias is not None else [])


def init_conv(rng: np.random.Generator, in_channels: int, out_channels: int,
              kernel: Tuple[int, int], stride: Tuple[int, int] = (1, 1),
              transposed: bool = False, bias: bool = True,
              name: str = "conv") -> Conv2DParams:
    """Uniform +/- 1/sqrt(fan_in) initialisation, fan_in = in_channels * kh * kw."""
    kh, kw = kernel
    bound = 1.0 / math.sqrt(in_channels * kh * kw)
    lead = (in_channels, out_channels) if transposed else (out_channels, in_channels)
    w = parameter(rng.uniform(-bound, bound, size=lead + (kh, kw)), name=f"{name}.weights")
    b = parameter(rng.uniform(-bound, bound, size=(out_channels,)), name=f"{name}.bias") if bias else None
    return Conv2DParams(in_channels, out_channels, (kh, kw), tuple(stride), w, b, transposed)


def init_linear(rng: np.random.Generator, in_dim: int, out_dim: int,
                bias: bool = True, name: str = "linear") -> LinearParams:
    bound = 1.0 / math.sqrt(in_dim)
    w = parameter(rng.uniform(-bound, bound, size=(out_dim, in_dim)), name=f"{name}.weights")
    b = parameter(rng.uniform(-bound, bound, size=(out_dim,)), name=f"{name}.bias") if bias else None
    return LinearParams(in_dim, out_dim, w, b)
