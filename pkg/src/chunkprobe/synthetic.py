"""Synthetic separable embeddings: one random prototype code per pattern.

Each distinct pattern label receives a fixed code drawn in a random
low-dimensional subspace of the embedding space; sentences get their
pattern's prototype plus isotropic Gaussian noise.  These oracles make the
probing tasks solvable by construction, which pins down the training
pipeline without any external encoder.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import ShapeError
from .store import EMBED_DIM, EmbeddingStore


@dataclass
class SyntheticConfig:
    dim: int = EMBED_DIM
    code_dim: int = 64
    sigma: float = 0.1


def make_codebook(labels: Sequence[str], seed: int,
                  config: SyntheticConfig = SyntheticConfig()) -> Dict[str, np.ndarray]:
    """Deterministic label -> prototype vectors (orthonormal basis x codes)."""
    labels = sorted(set(labels))
    if not labels:
        raise ShapeError("codebook needs at least one label")
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.standard_normal((config.dim, config.code_dim)))
    codes = rng.standard_normal((len(labels), config.code_dim))
    return {label: basis @ codes[i] for i, label in enumerate(labels)}


def make_synthetic_store(ids_and_patterns: Sequence[Tuple[str, str]], seed: int,
                         config: SyntheticConfig = SyntheticConfig(),
                         model_name: str = "synthetic-oracle") -> EmbeddingStore:
    """One noisy prototype embedding per (sentence_id, pattern label) pair."""
    codebook = make_codebook([p for _, p in ids_and_patterns], seed, config)
    rng = np.random.default_rng(seed + 1)
    ids: List[str] = []
    rows: List[np.ndarray] = []
    seen = set()
    for sid, pattern in ids_and_patterns:
        if sid in seen:
            continue
        seen.add(sid)
        ids.append(sid)
        rows.append(codebook[pattern] + config.sigma * rng.standard_normal(config.dim))
    vectors = np.asarray(np.stack(rows), dtype=np.float32)
    return EmbeddingStore(ids, vectors, model_name)
