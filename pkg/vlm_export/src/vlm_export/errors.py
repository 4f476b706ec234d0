"""Exporter error taxonomy."""


class VlmExportError(Exception):
    """Base class for all exporter errors."""


class ModelLoadFailure(VlmExportError):
    """The requested encoder could not be constructed."""


class EncodingFailure(VlmExportError):
    """The encoder failed on a specific input."""


class ImageLoadFailure(VlmExportError):
    """An image file could not be read or decoded."""


class DegenerateBox(VlmExportError):
    """A crop box has non-positive extent or leaves the image bounds."""


class ManifestError(VlmExportError):
    """The export manifest is structurally invalid."""
