"""fleetlens: plate-grouped vehicle attribute inference pipeline."""

from .domain import (
    NO_DETECTION,
    BoundingBox,
    Detection,
    EvalReport,
    Finding,
    ImageRecord,
    Prediction,
    SplitManifest,
    Task,
    Taxonomy,
    VoteTally,
    binarize_colour,
    canonicalize,
    normalize_plate,
)

__version__ = "0.1.0"

__all__ = [
    "NO_DETECTION",
    "BoundingBox",
    "Detection",
    "EvalReport",
    "Finding",
    "ImageRecord",
    "Prediction",
    "SplitManifest",
    "Task",
    "Taxonomy",
    "VoteTally",
    "binarize_colour",
    "canonicalize",
    "normalize_plate",
]
