"""Image-dataset feature extraction for the sketchfer pipeline."""

from .extract import (
    MODELS,
    ExtractionConfig,
    ExtractionError,
    build_model,
    extract,
    hook_targets,
    write_array,
)

__all__ = [
    "MODELS",
    "ExtractionConfig",
    "ExtractionError",
    "build_model",
    "extract",
    "hook_targets",
    "write_array",
]
