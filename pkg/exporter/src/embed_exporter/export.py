"""Batch export: sentences file -> SEBEMB01 store + manifest."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from .encoders import check_model_name, load_encoder
from .errors import DimensionError, EncodeError, ExporterError
from .inputs import read_sentences
from .store import EMBED_DIM, write_store

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExportJob:
    model_name: str
    sentences_file: str
    out: str
    batch_size: int = 32

    def __post_init__(self):
        check_model_name(self.model_name)
        if self.batch_size < 1:
            raise ExporterError(f"batch_size must be >= 1, "
                                f"got {self.batch_size}")


@dataclass(frozen=True)
class ExportResult:
    store_path: Path
    count: int
    dim: int


def resolve_store_path(out) -> Path:
    """A ``.bin`` path is used as-is; anything else is a directory."""
    out = Path(out)
    return out if out.suffix == ".bin" else out / "embeddings.bin"


def _encode_batch(encoder, ids: Sequence[str],
                  texts: Sequence[str]) -> np.ndarray:
    """Encode one batch, attributing any failure to a sentence id."""
    try:
        return np.asarray(encoder.encode(list(texts)))
    except ExporterError:
        raise
    except Exception as batch_exc:                   # noqa: BLE001
        for sid, text in zip(ids, texts):
            try:
                encoder.encode([text])
            except Exception as exc:                 # noqa: BLE001
                raise EncodeError(f"sentence {sid}: {type(exc).__name__}: "
                                  f"{exc}") from exc
        raise EncodeError(f"batch starting at sentence {ids[0]} failed: "
                          f"{batch_exc}") from batch_exc


def run_export(job: ExportJob, encoder=None) -> ExportResult:
    """Encode every sentence in input order and write the store.

    The store is only written after the whole payload is validated, so a
    dimension mismatch or a failing sentence aborts without partial output.
    """
    entries: List[Tuple[str, str]] = read_sentences(job.sentences_file)
    if encoder is None:
        encoder = load_encoder(job.model_name)
    ids = [sid for sid, _ in entries]
    blocks = []
    for start in range(0, len(entries), job.batch_size):
        chunk = entries[start:start + job.batch_size]
        block = _encode_batch(encoder, [sid for sid, _ in chunk],
                              [text for _, text in chunk])
        if block.ndim != 2 or block.shape[0] != len(chunk):
            raise ExporterError(f"encoder returned shape {block.shape} for "
                                f"a batch of {len(chunk)}")
        blocks.append(block.astype(np.float32))
    vectors = (np.concatenate(blocks) if blocks
               else np.zeros((0, EMBED_DIM), dtype=np.float32))
    if vectors.shape[1] != EMBED_DIM:
        raise DimensionError(f"model {job.model_name!r} produced "
                             f"{vectors.shape[1]}-dim vectors, "
                             f"store requires {EMBED_DIM}")
    store_path = resolve_store_path(job.out)
    store_path.parent.mkdir(parents=True, exist_ok=True)
    write_store(store_path, ids, vectors, job.model_name)
    log.info("wrote %d embeddings (dim %d) to %s", len(ids), EMBED_DIM,
             store_path)
    return ExportResult(store_path, len(ids), EMBED_DIM)
