"""Offline exporter for transformer sentence embeddings.

Runs a pretrained encoder over a sentences file and writes the vectors in
the ``SEBEMB01`` store format (with its sibling TSV manifest), or serves
the same vectors over the ``POST /embed`` HTTP contract.  The five
supported encoders produce 768-dimensional embeddings: the raw models
contribute their first-token last-hidden-state, the two sentence
transformers their pooled output.
"""

from .encoders import SUPPORTED_MODELS, StubEncoder, load_encoder
from .errors import (DimensionError, EncodeError, ExporterError,
                     InputFormatError, UnknownModelError)
from .export import ExportJob, ExportResult, run_export
from .inputs import read_sentences
from .store import EMBED_DIM, MAGIC, manifest_path, write_store

__version__ = "0.1.0"

__all__ = [
    "DimensionError", "EMBED_DIM", "EncodeError", "ExportJob", "ExportResult",
    "ExporterError", "InputFormatError", "MAGIC", "StubEncoder",
    "SUPPORTED_MODELS", "UnknownModelError", "load_encoder", "manifest_path",
    "read_sentences", "run_export", "write_store",
]
