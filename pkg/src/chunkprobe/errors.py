"""Exception types shared across the toolkit."""


class ChunkProbeError(Exception):
    """Base class for all toolkit errors."""


class ShapeError(ChunkProbeError):
    """Tensor shapes are incompatible with the requested operation."""


class DegenerateInputError(ChunkProbeError):
    """An input is mathematically degenerate (e.g. zero-norm vector for cosine)."""


class NonFiniteError(ChunkProbeError):
    """A value that must be finite is NaN or infinite."""


class SeedFileError(ChunkProbeError):
    """A seed/lexicon file is malformed; carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class GenerationError(ChunkProbeError):
    """Dataset generation cannot satisfy its constraints."""


class StoreFormatError(ChunkProbeError):
    """An embedding store file is corrupt or has the wrong format."""


class FetchError(ChunkProbeError):
    """Remote embedding fetch failed after retries or returned bad data."""


class ConfigError(ChunkProbeError):
    """Invalid run configuration."""


class PreflightError(ChunkProbeError):
    """A run cannot start (e.g. embeddings missing); carries the missing ids."""

    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = tuple(missing)
