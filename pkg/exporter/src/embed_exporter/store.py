"""Writer for the ``SEBEMB01`` embedding-store format.

Layout: 8-byte magic ``SEBEMB01``, little-endian uint32 count, uint32 dim,
then count*dim float32 values.  A sibling ``<name>.manifest.tsv`` maps row
index -> sentence_id and records the producing model name and dim.  The
writer is deterministic: identical inputs produce byte-identical files.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionError, ExporterError

MAGIC = b"SEBEMB01"
EMBED_DIM = 768


def manifest_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".manifest.tsv")


def write_store(path, sentence_ids: Sequence[str], vectors: np.ndarray,
                model_name: str) -> Path:
    """Write payload and manifest; returns the payload path."""
    path = Path(path)
    vec = np.ascontiguousarray(vectors, dtype="<f4")
    if vec.ndim != 2:
        raise ExporterError(f"store vectors must be 2-D, got shape {vec.shape}")
    count, dim = vec.shape
    if dim != EMBED_DIM:
        raise DimensionError(f"store dim must be {EMBED_DIM}, got {dim}")
    if len(sentence_ids) != count:
        raise ExporterError(f"{len(sentence_ids)} sentence ids for "
                            f"{count} vector rows")
    if len(set(sentence_ids)) != len(sentence_ids):
        raise ExporterError("duplicate sentence_id in export batch")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", count, dim))
        fh.write(vec.tobytes())
    lines = ["row\tsentence_id\tmodel\tdim"]
    for i, sid in enumerate(sentence_ids):
        lines.append(f"{i}\t{sid}\t{model_name}\t{dim}")
    manifest_path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
