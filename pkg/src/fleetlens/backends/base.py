"""Uniform interface to attribute predictors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

from ..domain import Detection, Task

Ranking = list[tuple[str, float]]


@dataclass(frozen=True)
class BackendDescriptor:
    """Identity and mode of a configured backend.

    ``backend_id`` is the spec string that produced the backend and stays
    stable across a run (e.g. "sim:p=0.8,q=0.05,seed=7").
    """

    backend_id: str
    task: Task
    mode: str

    def __post_init__(self) -> None:
        if self.mode not in ("detect", "classify"):
            raise ValueError(f"mode must be detect or classify, got {self.mode!r}")


@runtime_checkable
class DetectorBackend(Protocol):
    """Anything that can predict attributes for a single image."""

    descriptor: BackendDescriptor

    def detect(self, image_ref: str, record_id: str) -> list[Detection]:
        """Zero or more validated detections; empty list means no detection."""
        ...

    def classify(self, image_ref: str, record_id: str) -> Ranking:
        """Ranked (label, confidence) list, descending; empty means no result."""
        ...
