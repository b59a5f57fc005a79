"""One-shot export of torchvision classifiers into the msv backend's model format."""

from .exporter import (
    ExportError,
    ExportManifest,
    RoundTripReport,
    export_model,
    fixed_test_image,
)

__all__ = [
    "ExportError",
    "ExportManifest",
    "RoundTripReport",
    "export_model",
    "fixed_test_image",
]

__version__ = "0.1.0"
