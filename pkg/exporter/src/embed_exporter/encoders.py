"""Encoder registry: the five supported models plus an offline stub.

Raw encoders (Electra, multilingual BERT, XLM-RoBERTa) contribute the
last-layer hidden state of the first token; the two sentence transformers
(LaBSE, MPNet) contribute their library-default pooled vector.  All five
produce 768-dimensional embeddings.  The heavyweight libraries are
imported lazily so the exporter works without them installed (stub mode,
format tooling, tests).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import UnknownModelError
from .store import EMBED_DIM


@dataclass(frozen=True)
class ModelSpec:
    hf_id: str
    pooled: bool


MODEL_SPECS = {
    "electra-base-discriminator": ModelSpec("google/electra-base-discriminator",
                                            pooled=False),
    "bert-base-multilingual-cased": ModelSpec("bert-base-multilingual-cased",
                                              pooled=False),
    "xlm-roberta-base": ModelSpec("xlm-roberta-base", pooled=False),
    "LaBSE": ModelSpec("sentence-transformers/LaBSE", pooled=True),
    "all-mpnet-base-v2": ModelSpec("sentence-transformers/all-mpnet-base-v2",
                                   pooled=True),
}

SUPPORTED_MODELS = tuple(MODEL_SPECS)


def check_model_name(model_name: str) -> None:
    if model_name not in MODEL_SPECS:
        raise UnknownModelError(
            f"unknown model {model_name!r}; supported models: "
            + ", ".join(SUPPORTED_MODELS))


class StubEncoder:
    """Deterministic hash-seeded vectors; stands in for a real encoder.

    Vectors depend only on (model_name, sentence text), so exports are
    stable across processes and machines without any model download.
    """

    def __init__(self, model_name: str, dim: int = EMBED_DIM):
        check_model_name(model_name)
        self.model_name = model_name
        self.dim = dim

    def _row(self, text: str) -> np.ndarray:
        digest = hashlib.sha256(
            f"{self.model_name}\x1f{text}".encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        return rng.standard_normal(self.dim).astype(np.float32)

    def encode(self, sentences: Sequence[str]) -> np.ndarray:
        if not sentences:
            return np.zeros((0, self.dim), dtype=np.float32)
        return np.stack([self._row(text) for text in sentences])


class RawEncoder:
    """First-token last-hidden-state of a raw transformer encoder."""

    def __init__(self, model_name: str):
        check_model_name(model_name)
        import torch                                 # noqa: PLC0415
        from transformers import AutoModel, AutoTokenizer  # noqa: PLC0415

        spec = MODEL_SPECS[model_name]
        self.model_name = model_name
        self._torch = torch
        self._tokenizer = AutoTokenizer.from_pretrained(spec.hf_id)
        self._model = AutoModel.from_pretrained(spec.hf_id)
        self._model.eval()

    def encode(self, sentences: Sequence[str]) -> np.ndarray:
        if not sentences:
            return np.zeros((0, EMBED_DIM), dtype=np.float32)
        batch = self._tokenizer(list(sentences), return_tensors="pt",
                                padding=True, truncation=True)
        with self._torch.no_grad():
            hidden = self._model(**batch).last_hidden_state
        return hidden[:, 0, :].cpu().numpy().astype(np.float32)


class PooledEncoder:
    """Library-default pooled vector of a sentence-transformer model."""

    def __init__(self, model_name: str):
        check_model_name(model_name)
        from sentence_transformers import SentenceTransformer  # noqa: PLC0415

        spec = MODEL_SPECS[model_name]
        self.model_name = model_name
        self._model = SentenceTransformer(spec.hf_id)

    def encode(self, sentences: Sequence[str]) -> np.ndarray:
        if not sentences:
            return np.zeros((0, EMBED_DIM), dtype=np.float32)
        return np.asarray(
            self._model.encode(list(sentences), convert_to_numpy=True,
                               show_progress_bar=False), dtype=np.float32)


def load_encoder(model_name: str, stub: bool = False,
                 stub_dim: int = EMBED_DIM):
    """Real encoder for the named model, or the deterministic stub."""
    check_model_name(model_name)
    if stub:
        return StubEncoder(model_name, dim=stub_dim)
    if MODEL_SPECS[model_name].pooled:
        return PooledEncoder(model_name)
    return RawEncoder(model_name)
