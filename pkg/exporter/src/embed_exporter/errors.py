"""Exporter error hierarchy; the CLI maps ExporterError to exit code 1."""


class ExporterError(Exception):
    """Base class for every expected exporter failure."""


class UnknownModelError(ExporterError):
    """Requested model is not in the supported registry."""


class DimensionError(ExporterError):
    """An encoder produced vectors whose width is not the store dimension."""


class EncodeError(ExporterError):
    """Encoding failed for a specific sentence; the message names its id."""


class InputFormatError(ExporterError):
    """A sentences file does not match either supported JSONL shape."""
