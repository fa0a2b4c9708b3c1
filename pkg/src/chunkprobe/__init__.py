"""chunkprobe: probing chunk structure in sentence embeddings with VAEs."""

from ._kernels import backend as kernel_backend

__version__ = "0.1.0"

__all__ = ["__version__", "kernel_backend"]
