"""Binary embedding store, 768 -> 32x24 reshaping, and the remote fetch client.

Store layout: 8-byte magic ``SEBEMB01``, little-endian uint32 count, uint32
dim, then count*dim float32 values.  A sibling ``<name>.manifest.tsv`` maps
row index -> sentence_id and records the producing model name and dim.
"""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np
import requests

from .errors import FetchError, ShapeError, StoreFormatError

MAGIC = b"SEBEMB01"
EMBED_DIM = 768
GRID_ROWS, GRID_COLS = 32, 24


@dataclass
class EmbeddingStore:
    """In-memory view of a store: float32 payload plus the id index."""

    sentence_ids: List[str]
    vectors: np.ndarray  # [count, dim] float32
    model_name: str = "unknown"

    def __post_init__(self):
        if self.vectors.ndim != 2:
            raise ShapeError(f"store vectors must be 2-D, got {self.vectors.shape}")
        if len(self.sentence_ids) != self.vectors.shape[0]:
            raise StoreFormatError(f"{len(self.sentence_ids)} ids for "
                                   f"{self.vectors.shape[0]} payload rows")
        if len(set(self.sentence_ids)) != len(self.sentence_ids):
            raise StoreFormatError("duplicate sentence_id in store")
        self._index: Dict[str, int] = {s: i for i, s in enumerate(self.sentence_ids)}

    def __len__(self) -> int:
        return len(self.sentence_ids)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __contains__(self, sentence_id: str) -> bool:
        return sentence_id in self._index

    def get(self, sentence_id: str) -> np.ndarray:
        try:
            return self.vectors[self._index[sentence_id]]
        except KeyError:
            raise KeyError(f"sentence_id not in store: {sentence_id}") from None

    def missing(self, sentence_ids: Sequence[str]) -> List[str]:
        return [s for s in sentence_ids if s not in self._index]


def reshape_768_to_32x24(v: np.ndarray, order: str = "rowmajor") -> np.ndarray:
    """Row-major by default: flat index k -> (k // 24, k % 24)."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (EMBED_DIM,):
        raise ShapeError(f"expected a flat {EMBED_DIM}-vector, got shape {v.shape}")
    if order == "rowmajor":
        return v.reshape(GRID_ROWS, GRID_COLS)
    if order == "colmajor":
        return v.reshape(GRID_COLS, GRID_ROWS).T
    raise ShapeError(f"unknown reshape order: {order!r}")


def _manifest_path(path: Path) -> Path:
    return path.with_name(path.name + ".manifest.tsv")


def write_store(store: EmbeddingStore, path) -> None:
    path = Path(path)
    vec = np.ascontiguousarray(store.vectors, dtype="<f4")
    count, dim = vec.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", count, dim))
        fh.write(vec.tobytes())
    lines = ["row\tsentence_id\tmodel\tdim"]
    for i, sid in enumerate(store.sentence_ids):
        lines.append(f"{i}\t{sid}\t{store.model_name}\t{dim}")
    _manifest_path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_store(path) -> EmbeddingStore:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < len(MAGIC) + 8:
        raise StoreFormatError(f"{path}: file too short for a store header")
    if raw[:len(MAGIC)] != MAGIC:
        raise StoreFormatError(f"{path}: bad magic {raw[:len(MAGIC)]!r}")
    count, dim = struct.unpack_from("<II", raw, len(MAGIC))
    payload = raw[len(MAGIC) + 8:]
    expected = count * dim * 4
    if len(payload) != expected:
        raise StoreFormatError(f"{path}: payload holds {len(payload)} bytes, "
                               f"header promises {expected}")
    vectors = np.frombuffer(payload, dtype="<f4").reshape(count, dim).copy()

    mpath = _manifest_path(path)
    if not mpath.exists():
        raise StoreFormatError(f"{path}: missing manifest {mpath.name}")
    rows = mpath.read_text(encoding="utf-8").splitlines()
    if not rows or rows[0].split("\t") != ["row", "sentence_id", "model", "dim"]:
        raise StoreFormatError(f"{mpath}: unexpected manifest header")
    sentence_ids: List[str] = []
    model_name = "unknown"
    for line in rows[1:]:
        if not line.strip():
            continue
        cells = line.split("\t")
        if len(cells) != 4:
            raise StoreFormatError(f"{mpath}: malformed manifest line: {line!r}")
        sentence_ids.append(cells[1])
        model_name = cells[2]
    if len(sentence_ids) != count:
        raise StoreFormatError(f"{mpath}: manifest lists {len(sentence_ids)} rows, "
                               f"payload has {count}")
    return EmbeddingStore(sentence_ids, vectors, model_name)


def fetch_remote(endpoint: str, sentences: Sequence[str], model_name: str,
                 attempts: int = 3, backoff: float = 0.5,
                 session=None) -> np.ndarray:
    """POST /embed and return [len(sentences), 768] float32, order-preserving.

    Retries with exponential backoff; any persistent failure aborts the whole
    batch rather than returning partial results.
    """
    sentences = list(sentences)
    if not sentences:
        return np.zeros((0, EMBED_DIM), dtype=np.float32)
    url = endpoint.rstrip("/") + "/embed"
    http = session if session is not None else requests
    last_err: Exception | None = None
    for attempt in range(attempts):
        if attempt:
            time.sleep(backoff * (2 ** (attempt - 1)))
        try:
            resp = http.post(url, json={"model": model_name, "sentences": sentences},
                             timeout=60)
            if resp.status_code != 200:
                last_err = FetchError(f"{url} returned HTTP {resp.status_code}")
                continue
            body = resp.json()
        except (requests.RequestException, ValueError) as exc:
            last_err = exc
            continue
        dim = body.get("dim")
        vectors = body.get("vectors")
        if dim != EMBED_DIM:
            raise FetchError(f"endpoint returned dim {dim}, expected {EMBED_DIM}")
        if vectors is None or len(vectors) != len(sentences):
            raise FetchError(f"endpoint returned {0 if vectors is None else len(vectors)} "
                             f"vectors for {len(sentences)} sentences")
        out = np.asarray(vectors, dtype=np.float32)
        if out.shape != (len(sentences), EMBED_DIM):
            raise FetchError(f"response vectors have shape {out.shape}")
        return out
    raise FetchError(f"embedding fetch failed after {attempts} attempts: {last_err}")
