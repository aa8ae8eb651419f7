"""Deterministic table-driven backend for tests and replay."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping

from ..domain import BoundingBox, Detection, Task
from .base import BackendDescriptor, Ranking

DEFAULT_BBOX = BoundingBox(0.5, 0.5, 0.5, 0.5)


class MockBackend:
    """Fixture-driven backend: record_id -> scripted detections/rankings.

    Records absent from the table yield an empty result (no detection).
    """

    def __init__(
        self,
        backend_id: str,
        task: Task,
        mode: str = "detect",
        detections: Mapping[str, list[Detection]] | None = None,
        rankings: Mapping[str, Ranking] | None = None,
    ):
        self.descriptor = BackendDescriptor(backend_id=backend_id, task=task, mode=mode)
        self._detections = dict(detections or {})
        self._rankings = dict(rankings or {})

    @classmethod
    def from_file(cls, path: str | Path, task: Task, mode: str = "detect") -> "MockBackend":
        """Load a fixture JSON file.

        Shape: {"detections": {record_id: [{"class_id", "class_name",
        "confidence", "bbox"?}]}, "rankings": {record_id: [[label, conf]]}}.
        """
        path = Path(path)
        data = json.loads(path.read_text())
        detections = {
            record_id: [_parse_detection(d) for d in items]
            for record_id, items in data.get("detections", {}).items()
        }
        rankings = {
            record_id: [(str(label), float(conf)) for label, conf in items]
            for record_id, items in data.get("rankings", {}).items()
        }
        return cls(
            backend_id=f"mock:{path}",
            task=task,
            mode=mode,
            detections=detections,
            rankings=rankings,
        )

    def detect(self, image_ref: str, record_id: str) -> list[Detection]:
        return list(self._detections.get(record_id, []))

    def classify(self, image_ref: str, record_id: str) -> Ranking:
        return list(self._rankings.get(record_id, []))


def _parse_detection(data: Mapping) -> Detection:
    bbox = data.get("bbox")
    return Detection(
        class_id=int(data.get("class_id", 0)),
        class_name=str(data["class_name"]),
        confidence=float(data["confidence"]),
        bbox=BoundingBox(bbox["cx"], bbox["cy"], bbox["w"], bbox["h"]) if bbox else DEFAULT_BBOX,
    )
