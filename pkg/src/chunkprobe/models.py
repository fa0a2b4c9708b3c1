"""The sentence-level VAE, the two-level VAE, their losses, and checkpoints.

The sentence model compresses a 32x24-shaped embedding through a conv +
linear encoder into a 5-dimensional latent and reconstructs an embedding of
the same shape.  The two-level model stacks seven sentence latents into a
7x5 map, compresses that through the task encoder, and decodes a full
candidate-answer embedding.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import nn
from .errors import DegenerateInputError, ShapeError, StoreFormatError
from .nn.tensor import Tensor
from .store import GRID_COLS, GRID_ROWS

LATENT_DIM = 5
LOGVAR_CLAMP = 20.0

CHECKPOINT_MAGIC = b"CPCKPT01"


@dataclass
class ModelConfig:
    """Architecture knobs; the default preset is the stride-1 reading.

    preset "paper-240" uses stride (9, 4) so the conv output flattens to 240
    units; it exists for ablation and is otherwise shape-compatible.
    """

    preset: str = "default"
    channels: int = 40
    kernel: Tuple[int, int] = (15, 15)
    input_hw: Tuple[int, int] = (GRID_ROWS, GRID_COLS)
    latent_dim: int = LATENT_DIM
    task_channels: int = 32
    task_kernel: Tuple[int, int] = (4, 4)
    context_len: int = 7

    def __post_init__(self):
        self.kernel = tuple(self.kernel)
        self.input_hw = tuple(self.input_hw)
        self.task_kernel = tuple(self.task_kernel)

    @property
    def stride(self) -> Tuple[int, int]:
        return (9, 4) if self.preset == "paper-240" else (1, 1)

    @property
    def conv_out_hw(self) -> Tuple[int, int]:
        (h, w), (kh, kw), (sh, sw) = self.input_hw, self.kernel, self.stride
        return ((h - kh) // sh + 1, (w - kw) // sw + 1)

    @property
    def flat_dim(self) -> int:
        ho, wo = self.conv_out_hw
        return self.channels * ho * wo

    @property
    def task_conv_out_hw(self) -> Tuple[int, int]:
        kh, kw = self.task_kernel
        return (self.context_len - kh + 1, self.latent_dim - kw + 1)

    @property
    def task_flat_dim(self) -> int:
        ho, wo = self.task_conv_out_hw
        return self.task_channels * ho * wo


class SentenceVAE:
    """Conv(1->40, 15x15) + tanh + Linear(flat->10) encoder; mirrored decoder."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        c = self.config = config
        self.enc_conv = nn.init_conv(rng, 1, c.channels, c.kernel, c.stride,
                                     name="enc_conv")
        self.enc_lin = nn.init_linear(rng, c.flat_dim, 2 * c.latent_dim, name="enc_lin")
        self.dec_lin = nn.init_linear(rng, c.latent_dim, c.flat_dim, name="dec_lin")
        self.dec_conv = nn.init_conv(rng, c.channels, 1, c.kernel, c.stride,
                                     transposed=True, name="dec_conv")

    def named_params(self) -> Dict[str, Tensor]:
        out: Dict[str, Tensor] = {}
        for layer_name in ("enc_conv", "enc_lin", "dec_lin", "dec_conv"):
            layer = getattr(self, layer_name)
            out[f"{layer_name}.weights"] = layer.weights
            if layer.bias is not None:
                out[f"{layer_name}.bias"] = layer.bias
        return out

    def params(self) -> List[Tensor]:
        return list(self.named_params().values())

    def encode(self, x: Tensor) -> Tuple[Tensor, Tensor]:
        """x: [N,1,H,W] (or [1,H,W]) -> (mu, logvar), each [N,latent] (or [latent])."""
        c = self.config
        batched = x.ndim == 4
        n = x.shape[0] if batched else 1
        h = nn.tanh(nn.conv2d(x, self.enc_conv))
        flat = nn.reshape(h, (n, c.flat_dim))
        t = nn.linear(flat, self.enc_lin)
        mu = nn.narrow(t, 0, c.latent_dim, axis=-1)
        logvar = nn.clamp(nn.narrow(t, c.latent_dim, 2 * c.latent_dim, axis=-1),
                          -LOGVAR_CLAMP, LOGVAR_CLAMP)
        if not batched:
            mu, logvar = nn.reshape(mu, (c.latent_dim,)), nn.reshape(logvar, (c.latent_dim,))
        return mu, logvar

    def decode(self, z: Tensor) -> Tensor:
        """z: [N,latent] (or [latent]) -> reconstruction [N,1,H,W] (or [1,H,W])."""
        c = self.config
        batched = z.ndim == 2
        n = z.shape[0] if batched else 1
        if z.shape[-1] != c.latent_dim:
            raise ShapeError(f"decode: latent must have size {c.latent_dim}, "
                             f"got shape {z.shape}")
        h = nn.tanh(nn.linear(nn.reshape(z, (n, c.latent_dim)), self.dec_lin))
        ho, wo = c.conv_out_hw
        maps = nn.reshape(h, (n, c.channels, ho, wo))
        out = nn.transposed_conv2d(maps, self.dec_conv, output_hw=c.input_hw)
        return out if batched else nn.reshape(out, (1,) + c.input_hw)

    def forward(self, x: Tensor, rng: Optional[np.random.Generator] = None):
        """Full pass; samples the latent when an rng is given, else uses mu."""
        mu, logvar = self.encode(x)
        z = nn.reparameterize(mu, logvar, rng) if rng is not None else mu
        return self.decode(z), mu, logvar, z


class TwoLevelVAE:
    """Sentence VAE plus a task encoder over the stacked 7x5 latent map."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        c = self.config = config
        self.sentence = SentenceVAE(config, rng)
        self.task_conv = nn.init_conv(rng, 1, c.task_channels, c.task_kernel,
                                      name="task_conv")
        self.task_lin = nn.init_linear(rng, c.task_flat_dim, 2 * c.latent_dim,
                                       name="task_lin")
        self.task_dec_lin = nn.init_linear(rng, c.latent_dim, c.flat_dim,
                                           name="task_dec_lin")
        self.task_dec_conv = nn.init_conv(rng, c.channels, 1, c.kernel, c.stride,
                                          transposed=True, name="task_dec_conv")

    def named_params(self) -> Dict[str, Tensor]:
        out = {f"sentence.{k}": v for k, v in self.sentence.named_params().items()}
        for layer_name in ("task_conv", "task_lin", "task_dec_lin", "task_dec_conv"):
            layer = getattr(self, layer_name)
            out[f"{layer_name}.weights"] = layer.weights
            if layer.bias is not None:
                out[f"{layer_name}.bias"] = layer.bias
        return out

    def params(self) -> List[Tensor]:
        return list(self.named_params().values())

    def task_decode(self, z: Tensor) -> Tensor:
        c = self.config
        n = z.shape[0]
        h = nn.tanh(nn.linear(z, self.task_dec_lin))
        ho, wo = c.conv_out_hw
        maps = nn.reshape(h, (n, c.channels, ho, wo))
        return nn.transposed_conv2d(maps, self.task_dec_conv, output_hw=c.input_hw)

    def forward(self, contexts: np.ndarray, rng: Optional[np.random.Generator] = None):
        """contexts: [N,7,1,H,W] -> (answer reconstruction, diagnostics dict).

        Sentence latents are sampled when rng is given (training) and mu
        otherwise (evaluation); they are stacked in context order.
        """
        c = self.config
        if contexts.ndim != 5 or contexts.shape[1] != c.context_len:
            raise ShapeError(f"contexts must be [N,{c.context_len},1,H,W], "
                             f"got {contexts.shape}")
        n = contexts.shape[0]
        xs = Tensor(contexts.reshape((n * c.context_len, 1) + c.input_hw))
        mu_s, lv_s = self.sentence.encode(xs)
        z_s = nn.reparameterize(mu_s, lv_s, rng) if rng is not None else mu_s
        recon_s = self.sentence.decode(z_s)
        stackmap = nn.reshape(z_s, (n, 1, c.context_len, c.latent_dim))
        h = nn.tanh(nn.conv2d(stackmap, self.task_conv))
        ho, wo = c.task_conv_out_hw
        t = nn.linear(nn.reshape(h, (n, c.task_flat_dim)), self.task_lin)
        mu_t = nn.narrow(t, 0, c.latent_dim, axis=-1)
        lv_t = nn.clamp(nn.narrow(t, c.latent_dim, 2 * c.latent_dim, axis=-1),
                        -LOGVAR_CLAMP, LOGVAR_CLAMP)
        z_t = nn.reparameterize(mu_t, lv_t, rng) if rng is not None else mu_t
        answer = self.task_decode(z_t)
        return answer, {"mu_s": mu_s, "lv_s": lv_s, "z_s": z_s, "recon_s": recon_s,
                        "mu_t": mu_t, "lv_t": lv_t, "z_t": z_t}


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

def sentence_batch_loss(model: SentenceVAE, inputs: np.ndarray, positives: np.ndarray,
                        negatives: np.ndarray,
                        rng: Optional[np.random.Generator],
                        kl_weight: float = 1.0) -> Tensor:
    """Mean over the batch of max_margin + kl_weight * KL/latent_dim.

    inputs: [N,1,H,W]; positives: [N,H*W]; negatives: [N,K,H*W].
    The KL term enters averaged over latent dimensions (reduction-mean
    convention); without this normalization the KL cost of an informative
    latent exceeds the bounded margin gain and training settles into a
    near-collapsed posterior.  kl_weight=0 isolates the margin term (used
    by optimizer sanity checks); kl_weight=latent_dim recovers the plain
    unweighted sum of the two terms.
    """
    n = inputs.shape[0]
    dim = inputs.shape[-2] * inputs.shape[-1]
    if positives.shape != (n, dim):
        raise ShapeError(f"positives shape {positives.shape}, expected {(n, dim)}")
    if negatives.ndim != 3 or negatives.shape[0] != n or negatives.shape[2] != dim:
        raise ShapeError(f"negatives shape {negatives.shape}")
    recon, mu, logvar, _ = model.forward(Tensor(inputs), rng)
    e_hat = nn.reshape(recon, (n, dim))
    pos_cos = nn.cosine_similarity(e_hat, Tensor(positives))
    neg_cos = nn.cosine_similarity(nn.reshape(e_hat, (n, 1, dim)),
                                   Tensor(negatives))
    mm = nn.max_margin(pos_cos, neg_cos)
    kl = nn.kl_standard_normal(mu, logvar)
    return nn.add(nn.mean(mm), nn.scale(kl, kl_weight / (n * mu.shape[-1])))


def sentence_loss(model: SentenceVAE, x_in: np.ndarray, positive: np.ndarray,
                  negatives: Sequence[np.ndarray],
                  rng: Optional[np.random.Generator] = None,
                  kl_weight: float = 1.0) -> Tensor:
    """Single-triple convenience wrapper over sentence_batch_loss."""
    negs = np.stack([np.asarray(v, dtype=np.float64) for v in negatives])
    return sentence_batch_loss(model, np.asarray(x_in, dtype=np.float64)[None],
                               np.asarray(positive, dtype=np.float64)[None],
                               negs[None], rng, kl_weight)


def make_onthefly_triples(context: Sequence) -> List[Tuple[object, object, List[object]]]:
    """For each sentence s of a 7-sentence context: (in=s, out+=s, out-=rest)."""
    items = list(context)
    if len(items) != 7:
        raise ShapeError(f"context must have exactly 7 sentences, got {len(items)}")
    return [(s, s, [o for j, o in enumerate(items) if j != i])
            for i, s in enumerate(items)]


def two_level_loss(model: TwoLevelVAE, contexts: np.ndarray, correct: np.ndarray,
                   wrong: np.ndarray, rng: Optional[np.random.Generator],
                   kl_weight: float = 1.0) -> Tensor:
    """Sentence-level term (averaged over the 7 on-the-fly triples) + task term.

    contexts: [N,7,1,H,W]; correct: [N,H*W]; wrong: [N,K,H*W].
    Both KL terms are averaged over latent dimensions and scaled by
    kl_weight, matching the sentence-level loss convention.
    """
    n, ctx_len = contexts.shape[0], contexts.shape[1]
    dim = contexts.shape[-2] * contexts.shape[-1]
    answer, parts = model.forward(contexts, rng)
    total = n * ctx_len

    # On-the-fly triples: out+ is the input itself, out- the other six rows.
    flat_ctx = contexts.reshape(total, dim)
    e_hat_s = nn.reshape(parts["recon_s"], (total, dim))
    pos_cos = nn.cosine_similarity(e_hat_s, Tensor(flat_ctx))
    others = np.empty((total, ctx_len - 1, dim))
    keep = [[j for j in range(ctx_len) if j != i] for i in range(ctx_len)]
    grouped = contexts.reshape(n, ctx_len, dim)
    for i in range(ctx_len):
        others[i::ctx_len] = grouped[:, keep[i], :]
    neg_cos = nn.cosine_similarity(nn.reshape(e_hat_s, (total, 1, dim)),
                                   Tensor(others))
    latent = parts["mu_s"].shape[-1]
    mm_s = nn.max_margin(pos_cos, neg_cos)
    sent_term = nn.add(nn.mean(mm_s),
                       nn.scale(nn.kl_standard_normal(parts["mu_s"], parts["lv_s"]),
                                kl_weight / (total * latent)))

    e_hat_t = nn.reshape(answer, (n, dim))
    pos_t = nn.cosine_similarity(e_hat_t, Tensor(correct))
    neg_t = nn.cosine_similarity(nn.reshape(e_hat_t, (n, 1, dim)), Tensor(wrong))
    mm_t = nn.max_margin(pos_t, neg_t)
    task_term = nn.add(nn.mean(mm_t),
                       nn.scale(nn.kl_standard_normal(parts["mu_t"], parts["lv_t"]),
                                kl_weight / (n * latent)))
    return nn.add(sent_term, task_term)


def predict_answer(e_hat: np.ndarray, candidates: np.ndarray) -> int:
    """Index of the candidate with the highest cosine; ties take the lowest."""
    e_hat = np.asarray(e_hat, dtype=np.float64).reshape(-1)
    candidates = np.asarray(candidates, dtype=np.float64)
    if candidates.ndim != 2 or candidates.shape[0] < 2:
        raise ShapeError(f"need at least 2 candidates, got shape {candidates.shape}")
    ne = np.linalg.norm(e_hat)
    nc = np.linalg.norm(candidates, axis=1)
    if ne == 0.0 or np.any(nc == 0.0):
        raise DegenerateInputError("predict_answer: zero-norm vector")
    scores = (candidates @ e_hat) / (nc * ne)
    return int(np.argmax(scores))


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(path, named_params: Dict[str, Tensor], config: Dict,
                    seed: int) -> None:
    """Versioned container: magic, JSON header, float32 little-endian payload."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    layers = [{"name": k, "shape": list(v.data.shape)} for k, v in named_params.items()]
    header = json.dumps({"version": 1, "seed": seed, "config": config,
                         "layers": layers}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for v in named_params.values():
            fh.write(np.ascontiguousarray(v.data, dtype="<f4").tobytes())


def load_checkpoint(path) -> Tuple[Dict[str, np.ndarray], Dict, int]:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise StoreFormatError(f"{path}: bad checkpoint magic")
    (hlen,) = struct.unpack_from("<I", raw, len(CHECKPOINT_MAGIC))
    start = len(CHECKPOINT_MAGIC) + 4
    header = json.loads(raw[start:start + hlen].decode("utf-8"))
    offset = start + hlen
    weights: Dict[str, np.ndarray] = {}
    for layer in header["layers"]:
        shape = tuple(layer["shape"])
        size = int(np.prod(shape)) * 4
        chunk = raw[offset:offset + size]
        if len(chunk) != size:
            raise StoreFormatError(f"{path}: truncated payload at {layer['name']}")
        weights[layer["name"]] = np.frombuffer(chunk, dtype="<f4").reshape(shape).astype(np.float64)
        offset += size
    if offset != len(raw):
        raise StoreFormatError(f"{path}: {len(raw) - offset} trailing bytes")
    return weights, header["config"], header["seed"]


def restore_model(model, weights: Dict[str, np.ndarray]) -> None:
    named = model.named_params()
    if set(named) != set(weights):
        missing = set(named) ^ set(weights)
        raise StoreFormatError(f"checkpoint/model layer mismatch: {sorted(missing)}")
    for name, tensor in named.items():
        if weights[name].shape != tensor.data.shape:
            raise ShapeError(f"{name}: checkpoint shape {weights[name].shape} "
                             f"!= model shape {tensor.data.shape}")
        tensor.data = weights[name].copy()
