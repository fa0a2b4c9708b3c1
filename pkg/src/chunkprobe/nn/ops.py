"""Differentiable operations: convolutions, affine maps, and the VAE losses.

Spatial ops accept a single example [C, H, W] or a batch [N, C, H, W];
vector ops accept [d] or [N, d].  All computation is float64.
"""

from __future__ import annotations

from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .. import _kernels as kernels
from ..errors import DegenerateInputError, NonFiniteError, ShapeError
from .layers import Conv2DParams, LinearParams
from .tensor import Tensor, _make, accumulate_grad, stack


def _as_batch(x: Tensor, what: str) -> Tuple[np.ndarray, bool]:
    if x.ndim == 3:
        return np.ascontiguousarray(x.data[None]), False
    if x.ndim == 4:
        return np.ascontiguousarray(x.data), True
    raise ShapeError(f"{what}: expected 3 or 4 dimensions, got shape {x.shape}")


def conv2d(x: Tensor, p: Conv2DParams) -> Tensor:
    """Valid-padding strided convolution; channels [A,H,W] -> [B,Ho,Wo]."""
    if p.transposed:
        raise ShapeError("conv2d: params are marked transposed; use transposed_conv2d")
    xa, batched = _as_batch(x, "conv2d")
    bch, a, kh, kw = p.weights.shape
    n, c, h, w = xa.shape
    if c != a:
        raise ShapeError(f"conv2d: input has {c} channels, weights expect {a}")
    if h < kh or w < kw:
        raise ShapeError(f"conv2d: input {h}x{w} smaller than kernel {kh}x{kw}")
    sh, sw = p.stride
    y = kernels.conv2d_forward(xa, p.weights.data, sh, sw)
    if p.bias is not None:
        y = y + p.bias.data[None, :, None, None]
    out = _make(y if batched else y[0], p.tensors() + [x], None, name="conv2d")

    def bw(g):
        ga = np.ascontiguousarray(g if batched else g[None])
        if p.weights.requires_grad:
            accumulate_grad(p.weights, kernels.conv2d_weight_grad(xa, ga, kh, kw, sh, sw))
        if p.bias is not None and p.bias.requires_grad:
            accumulate_grad(p.bias, ga.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            gx = kernels.conv2d_input_grad(ga, p.weights.data, sh, sw, h, w)
            accumulate_grad(x, gx if batched else gx[0])

    out._backward_fn = bw if out.requires_grad else None
    return out


def transposed_conv2d(x: Tensor, p: Conv2DParams,
                      output_hw: Optional[Tuple[int, int]] = None) -> Tensor:
    """Adjoint of conv2d_forward: [B,h,w] -> [A,H,W] with H = (h-1)*sh + kh.

    Works with either weight orientation: transposed params apply their bias
    on the output, while plain conv params act as the pure adjoint map.
    An explicit output_hw may enlarge the output to any (H, W) a strided
    conv2d of that size would have produced, i.e. (H - kh) // sh + 1 == h.
    """
    xa, batched = _as_batch(x, "transposed_conv2d")
    bch, a, kh, kw = p.weights.shape
    n, c, h, w = xa.shape
    if c != bch:
        raise ShapeError(f"transposed_conv2d: input has {c} channels, weights expect {bch}")
    sh, sw = p.stride
    height, width = ((h - 1) * sh + kh, (w - 1) * sw + kw) if output_hw is None else output_hw
    if height < kh or width < kw or (height - kh) // sh + 1 != h or (width - kw) // sw + 1 != w:
        raise ShapeError(f"transposed_conv2d: output {height}x{width} inconsistent with "
                         f"input {h}x{w}, kernel {kh}x{kw}, stride {p.stride}")
    y = kernels.conv2d_input_grad(xa, p.weights.data, sh, sw, height, width)
    if p.transposed and p.bias is not None:
        y = y + p.bias.data[None, :, None, None]
    out = _make(y if batched else y[0], p.tensors() + [x], None, name="transposed_conv2d")

    def bw(g):
        ga = np.ascontiguousarray(g if batched else g[None])
        if p.weights.requires_grad:
            accumulate_grad(p.weights, kernels.conv2d_weight_grad(ga, xa, kh, kw, sh, sw))
        if p.transposed and p.bias is not None and p.bias.requires_grad:
            accumulate_grad(p.bias, ga.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            gx = kernels.conv2d_forward(ga, p.weights.data, sh, sw)
            accumulate_grad(x, gx if batched else gx[0])

    out._backward_fn = bw if out.requires_grad else None
    return out


def linear(x: Tensor, p: LinearParams) -> Tensor:
    """Affine map W x + b for a vector [n] or a batch of rows [N, n]."""
    if x.ndim not in (1, 2) or x.shape[-1] != p.in_dim:
        raise ShapeError(f"linear: input shape {x.shape} incompatible with in_dim {p.in_dim}")
    y = x.data @ p.weights.data.T
    if p.bias is not None:
        y = y + p.bias.data
    out = _make(y, p.tensors() + [x], None, name="linear")

    def bw(g):
        g2 = g if g.ndim == 2 else g[None]
        x2 = x.data if x.ndim == 2 else x.data[None]
        if p.weights.requires_grad:
            accumulate_grad(p.weights, g2.T @ x2)
        if p.bias is not None and p.bias.requires_grad:
            accumulate_grad(p.bias, g2.sum(axis=0))
        if x.requires_grad:
            accumulate_grad(x, g @ p.weights.data)

    out._backward_fn = bw if out.requires_grad else None
    return out


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    out = _make(y, (x,), None, name="tanh")

    def bw(g):
        accumulate_grad(x, g * (1.0 - y * y))

    out._backward_fn = bw if out.requires_grad else None
    return out


def clamp(x: Tensor, lo: float, hi: float) -> Tensor:
    """Elementwise clip; subgradient 0 at and beyond the kinks."""
    if not lo < hi:
        raise ShapeError(f"clamp: need lo < hi, got [{lo}, {hi}]")
    interior = (x.data > lo) & (x.data < hi)
    out = _make(np.clip(x.data, lo, hi), (x,), None, name="clamp")

    def bw(g):
        accumulate_grad(x, g * interior)

    out._backward_fn = bw if out.requires_grad else None
    return out


def _unbroadcast(g: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, (have, want) in enumerate(zip(g.shape, shape)):
        if want == 1 and have != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def cosine_similarity(a: Tensor, b: Tensor) -> Tensor:
    """Cosine over the last axis; leading axes broadcast NumPy-style."""
    if a.shape[-1] != b.shape[-1]:
        raise ShapeError(f"cosine_similarity: last axes differ, {a.shape} vs {b.shape}")
    na = np.linalg.norm(a.data, axis=-1)
    nb = np.linalg.norm(b.data, axis=-1)
    if np.any(na == 0.0) or np.any(nb == 0.0):
        raise DegenerateInputError("cosine_similarity: zero-norm vector")
    dot = np.sum(a.data * b.data, axis=-1)
    s = dot / (na * nb)
    out = _make(s, (a, b), None, name="cosine")

    def bw(g):
        ge = np.asarray(g)[..., None]
        na_e, nb_e, s_e = na[..., None], nb[..., None], s[..., None]
        if a.requires_grad:
            ga = ge * (b.data / (na_e * nb_e) - s_e * a.data / (na_e * na_e))
            accumulate_grad(a, _unbroadcast(ga, a.shape))
        if b.requires_grad:
            gb = ge * (a.data / (na_e * nb_e) - s_e * b.data / (nb_e * nb_e))
            accumulate_grad(b, _unbroadcast(gb, b.shape))

    out._backward_fn = bw if out.requires_grad else None
    return out


def kl_standard_normal(mu: Tensor, logvar: Tensor) -> Tensor:
    """KL(N(mu, diag exp(logvar)) || N(0, I)) summed over all entries."""
    if mu.shape != logvar.shape:
        raise ShapeError(f"kl: mu shape {mu.shape} != logvar shape {logvar.shape}")
    if not (np.all(np.isfinite(mu.data)) and np.all(np.isfinite(logvar.data))):
        raise NonFiniteError("kl: non-finite mu or logvar")
    ev = np.exp(logvar.data)
    val = 0.5 * np.sum(mu.data * mu.data + ev - 1.0 - logvar.data)
    if not np.isfinite(val):
        raise NonFiniteError("kl: non-finite result (logvar overflow)")
    out = _make(np.asarray(val), (mu, logvar), None, name="kl")

    def bw(g):
        gs = float(g)
        if mu.requires_grad:
            accumulate_grad(mu, gs * mu.data)
        if logvar.requires_grad:
            accumulate_grad(logvar, gs * 0.5 * (ev - 1.0))

    out._backward_fn = bw if out.requires_grad else None
    return out


def max_margin(pos: Tensor, negs: Union[Tensor, Sequence[Tensor]]) -> Tensor:
    """Hinge max(0, 1 - pos + mean(negs)); negatives average over the last axis.

    pos is a scalar or [N]; negs is [K] or [N, K] (a sequence of tensors is
    stacked along a new last axis first).
    """
    if not isinstance(negs, Tensor):
        negs = list(negs)
        if not negs:
            raise ShapeError("max_margin: empty negative list")
        negs = stack(negs, axis=-1)
    if negs.ndim != pos.ndim + 1 or negs.shape[:-1] != pos.shape:
        raise ShapeError(f"max_margin: negs shape {negs.shape} incompatible with pos {pos.shape}")
    k = negs.shape[-1]
    if k < 1:
        raise ShapeError("max_margin: empty negative list")
    m = 1.0 - pos.data + negs.data.mean(axis=-1)
    active = m > 0.0
    out = _make(np.maximum(m, 0.0), (pos, negs), None, name="max_margin")

    def bw(g):
        gm = np.asarray(g) * active
        if pos.requires_grad:
            accumulate_grad(pos, -gm)
        if negs.requires_grad:
            accumulate_grad(negs, np.broadcast_to((gm / k)[..., None], negs.shape).copy())

    out._backward_fn = bw if out.requires_grad else None
    return out


def reparameterize(mu: Tensor, logvar: Tensor, rng: np.random.Generator) -> Tensor:
    """Sample z = mu + exp(logvar/2) * eps with eps drawn from the given rng.

    logvar is clamped to [-20, 20] before exponentiation for stability.
    """
    if not isinstance(rng, np.random.Generator):
        raise TypeError("reparameterize: a numpy Generator is required")
    if mu.shape != logvar.shape:
        raise ShapeError(f"reparameterize: mu shape {mu.shape} != logvar shape {logvar.shape}")
    lv = np.clip(logvar.data, -20.0, 20.0)
    interior = (logvar.data > -20.0) & (logvar.data < 20.0)
    std = np.exp(0.5 * lv)
    eps = rng.standard_normal(mu.shape)
    out = _make(mu.data + std * eps, (mu, logvar), None, name="reparameterize")

    def bw(g):
        if mu.requires_grad:
            accumulate_grad(mu, np.asarray(g, dtype=np.float64).copy())
        if logvar.requires_grad:
            accumulate_grad(logvar, g * 0.5 * std * eps * interior)

    out._backward_fn = bw if out.requires_grad else None
    return out
