"""Seeded stochastic simulator backend.

Produces reproducible per-record outcomes from (seed, record_id), which
makes desk-scale majority-voting experiments exactly repeatable.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Mapping, Sequence

from ..domain import BoundingBox, Detection, Task
from .base import BackendDescriptor, Ranking

DEFAULT_BBOX = BoundingBox(0.5, 0.5, 0.6, 0.6)


@dataclass(frozen=True)
class StochasticProfile:
    """Outcome distribution for the simulator.

    With probability ``p_correct`` the truth label is emitted, with
    ``p_no_detection`` nothing, otherwise a wrong label drawn uniformly
    from the remaining canonical labels.
    """

    p_correct: float
    p_no_detection: float = 0.0
    error_spread: str = "uniform_other"
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("p_correct", "p_no_detection"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} outside [0, 1]: {value}")
        if self.p_correct + self.p_no_detection > 1.0:
            raise ValueError("p_correct + p_no_detection exceeds 1")
        if self.error_spread != "uniform_other":
            raise ValueError(f"unsupported error_spread {self.error_spread!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")


def record_rng(seed: int, record_id: str) -> random.Random:
    """Stable per-record RNG; independent of process hash randomization."""
    digest = hashlib.sha256(f"{seed}:{record_id}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


class StochasticBackend:
    """Simulator emitting truth / wrong label / no-detection per profile."""

    def __init__(
        self,
        backend_id: str,
        task: Task,
        labels: Sequence[str],
        truth: Mapping[str, str],
        profile: StochasticProfile,
        mode: str = "detect",
    ):
        if len(labels) < 2:
            raise ValueError("stochastic backend needs at least 2 labels")
        self.descriptor = BackendDescriptor(backend_id=backend_id, task=task, mode=mode)
        self.labels = list(labels)
        self.truth = truth
        self.profile = profile

    def draw(self, record_id: str) -> tuple[str | None, float]:
        """One seeded outcome: (label or None for no-detection, confidence)."""
        try:
            truth_label = self.truth[record_id]
        except KeyError:
            raise ValueError(f"no ground truth for record {record_id!r}") from None
        rng = record_rng(self.profile.seed, record_id)
        u = rng.random()
        confidence = 0.5 + 0.5 * rng.random()
        if u < self.profile.p_correct:
            return truth_label, confidence
        if u < self.profile.p_correct + self.profile.p_no_detection:
            return None, 0.0
        others = [l for l in self.labels if l != truth_label]
        return others[rng.randrange(len(others))], confidence

    def detect(self, image_ref: str, record_id: str) -> list[Detection]:
        label, confidence = self.draw(record_id)
        if label is None:
            return []
        return [
            Detection(
                class_id=self.labels.index(label),
                class_name=label,
                confidence=confidence,
                bbox=DEFAULT_BBOX,
            )
        ]

    def classify(self, image_ref: str, record_id: str) -> Ranking:
        label, confidence = self.draw(record_id)
        if label is None:
            return []
        return [(label, confidence)]
