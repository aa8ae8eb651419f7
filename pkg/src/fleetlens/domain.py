"""Shared vocabulary of the pipeline.

Records, detections, taxonomies, tallies, splits, and reports. Everything
here is an immutable value after construction and validates its own
invariants, so instances can be handed between concurrent workers freely.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Mapping

from .errors import UnknownLabel

# Reserved sentinel for an explicit "unknown" outcome. Never a member of any
# taxonomy; serialized as this literal string.
NO_DETECTION = "NO_DETECTION"

# Tolerance for bounding-box containment; absorbs rounding in decimal text
# labels without admitting genuinely out-of-frame boxes.
BBOX_EPS = 1e-6

_PLATE_RE = re.compile(r"^[A-Z0-9-]+$")


class Task(str, enum.Enum):
    """The four attribute-prediction tasks."""

    MAKE = "make"
    SHAPE = "shape"
    COLOUR = "colour"
    COLOUR_BINARY = "colour_binary"


def normalize_plate(raw: str) -> str:
    """Normalize a plate string: uppercase, whitespace removed, hyphens kept.

    Idempotent. Raises ValueError for empty input or characters outside
    [A-Z0-9-] after normalization.
    """
    value = "".join(raw.split()).upper()
    if not value:
        raise ValueError("plate id is empty after normalization")
    if not _PLATE_RE.match(value):
        raise ValueError(f"plate id {value!r} contains characters outside [A-Z0-9-]")
    return value


def parse_rfc3339(text: str) -> datetime:
    """Parse an RFC3339 timestamp into an aware UTC datetime."""
    try:
        dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError as exc:
        raise ValueError(f"not an RFC3339 timestamp: {text!r}") from exc
    if dt.tzinfo is None:
        raise ValueError(f"timestamp {text!r} has no UTC offset")
    return dt.astimezone(timezone.utc)


def format_rfc3339(dt: datetime) -> str:
    """Render an aware datetime as RFC3339 with a Z suffix."""
    return dt.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


@dataclass(frozen=True)
class BoundingBox:
    """Normalized center-format box (YOLO convention)."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box extents must be positive, got w={self.w} h={self.h}")
        for center, extent, name in ((self.cx, self.w, "x"), (self.cy, self.h, "y")):
            if center - extent / 2 < -BBOX_EPS or center + extent / 2 > 1 + BBOX_EPS:
                raise ValueError(f"box leaves the unit frame on the {name} axis")

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class Detection:
    """A localized class hypothesis with confidence."""

    class_id: int
    class_name: str
    confidence: float
    bbox: BoundingBox

    def __post_init__(self) -> None:
        if self.class_id < 0:
            raise ValueError(f"class_id must be >= 0, got {self.class_id}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence outside [0, 1]: {self.confidence}")


@dataclass(frozen=True)
class ImageRecord:
    """One captured image tied to a plate, with optional ground truth."""

    record_id: str
    plate_id: str
    image_ref: str
    captured_at: datetime
    lat: float | None = None
    lon: float | None = None
    label_ref: str | None = None
    ground_truth: Mapping[Task, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.record_id:
            raise ValueError("record_id is empty")
        if not self.image_ref:
            raise ValueError(f"record {self.record_id}: image_ref is empty")
        if self.lat is not None and not -90 <= self.lat <= 90:
            raise ValueError(f"record {self.record_id}: lat {self.lat} outside [-90, 90]")
        if self.lon is not None and not -180 <= self.lon <= 180:
            raise ValueError(f"record {self.record_id}: lon {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class Taxonomy:
    """Per-task label set with alias merging and a frequency threshold.

    ``labels`` are the canonical classes in class-id order. ``merge_map``
    folds aliases into canonical labels (e.g. Maroon -> Red). ``binary_map``
    assigns every colour label to bright or dark and is required for the
    colour_binary task.
    """

    task: Task
    labels: tuple[str, ...]
    merge_map: Mapping[str, str] = field(default_factory=dict)
    min_plate_frequency: int = 0
    binary_map: Mapping[str, str] | None = None

    def __post_init__(self) -> None:
        if not self.labels:
            raise ValueError("taxonomy has no labels")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("taxonomy labels are not unique")
        if NO_DETECTION in self.labels:
            raise ValueError(f"{NO_DETECTION} is reserved and cannot be a taxonomy label")
        label_set = set(self.labels)
        for alias, target in self.merge_map.items():
            if target not in label_set:
                raise ValueError(f"merge target {target!r} is not a canonical label")
            if alias in label_set:
                raise ValueError(f"alias {alias!r} is already a canonical label")
        if self.min_plate_frequency < 0:
            raise ValueError("min_plate_frequency must be >= 0")
        if self.binary_map is not None:
            bad = set(self.binary_map.values()) - {"bright", "dark"}
            if bad:
                raise ValueError(f"binary_map values must be bright/dark, got {sorted(bad)}")
        if self.task is Task.COLOUR_BINARY and self.binary_map is None:
            raise ValueError("colour_binary taxonomy requires a binary_map")

    def canonicalize(self, raw_label: str) -> str:
        return canonicalize(self, raw_label)

    def class_id(self, label: str) -> int:
        """Index of a canonical label; the on-disk class_id."""
        try:
            return self.labels.index(label)
        except ValueError:
            raise UnknownLabel(f"{label!r} is not a canonical {self.task.value} label") from None

    def to_dict(self) -> dict:
        out: dict = {
            "task": self.task.value,
            "labels": list(self.labels),
            "merge_map": dict(self.merge_map),
            "min_plate_frequency": self.min_plate_frequency,
        }
        if self.binary_map is not None:
            out["binary_map"] = dict(self.binary_map)
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "Taxonomy":
        return cls(
            task=Task(data["task"]),
            labels=tuple(data["labels"]),
            merge_map=dict(data.get("merge_map", {})),
            min_plate_frequency=int(data.get("min_plate_frequency", 0)),
            binary_map=dict(data["binary_map"]) if data.get("binary_map") else None,
        )


def canonicalize(taxonomy: Taxonomy, raw_label: str) -> str:
    """Fold an alias into its canonical label; identity on canonical labels.

    Raises UnknownLabel for anything outside the taxonomy and its merge map.
    """
    merged = taxonomy.merge_map.get(raw_label, raw_label)
    if merged not in taxonomy.labels:
        raise UnknownLabel(
            f"{raw_label!r} is neither a canonical {taxonomy.task.value} label nor an alias"
        )
    return merged


def binarize_colour(taxonomy: Taxonomy, colour_label: str) -> str:
    """Map a canonical colour label to its bright/dark group."""
    if taxonomy.binary_map is None:
        raise ValueError("taxonomy has no binary_map")
    try:
        return taxonomy.binary_map[colour_label]
    except KeyError:
        raise UnknownLabel(f"{colour_label!r} has no bright/dark assignment") from None


@dataclass(frozen=True)
class Prediction:
    """A per-image final label for one task, possibly NO_DETECTION."""

    record_id: str
    plate_id: str
    task: Task
    backend_id: str
    label: str
    confidence: float
    produced_at: datetime
    error: str | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence outside [0, 1]: {self.confidence}")
        if (self.label == NO_DETECTION) != (self.confidence == 0.0):
            raise ValueError(
                f"record {self.record_id}: label {self.label!r} with confidence "
                f"{self.confidence} violates the NO_DETECTION <=> zero-confidence rule"
            )

    @property
    def no_detection(self) -> bool:
        return self.label == NO_DETECTION


@dataclass(frozen=True)
class VoteTally:
    """Per-plate vote counts and the majority winner for one task."""

    plate_id: str
    task: Task
    backend_id: str
    counts: Mapping[str, int]
    winner: str
    tie_broken: bool
    evidence: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.counts:
            raise ValueError(f"plate {self.plate_id}: tally has no votes")
        if any(c < 1 for c in self.counts.values()):
            raise ValueError(f"plate {self.plate_id}: vote counts must be >= 1")
        if sum(self.counts.values()) != len(self.evidence):
            raise ValueError(f"plate {self.plate_id}: counts do not sum to the evidence size")
        if self.winner not in self.counts:
            raise ValueError(f"plate {self.plate_id}: winner {self.winner!r} not among counts")
        if self.winner == NO_DETECTION and len(self.counts) > 1:
            raise ValueError(
                f"plate {self.plate_id}: {NO_DETECTION} can only win as the sole outcome"
            )
        top = self.counts[self.winner]
        for label, count in self.counts.items():
            if label != NO_DETECTION and count > top:
                raise ValueError(
                    f"plate {self.plate_id}: winner {self.winner!r} is dominated by {label!r}"
                )


@dataclass(frozen=True)
class SplitManifest:
    """Deterministic plate partition into train/val/test."""

    seed: int
    test_fraction: float
    val_fraction_of_remainder: float
    assignment: Mapping[str, str]

    PARTITIONS = ("train", "val", "test")

    def __post_init__(self) -> None:
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        for name, frac in (
            ("test_fraction", self.test_fraction),
            ("val_fraction_of_remainder", self.val_fraction_of_remainder),
        ):
            if not 0 < frac < 1:
                raise ValueError(f"{name} must be in (0, 1), got {frac}")
        bad = set(self.assignment.values()) - set(self.PARTITIONS)
        if bad:
            raise ValueError(f"unknown partitions in assignment: {sorted(bad)}")

    def plates(self, partition: str) -> list[str]:
        return sorted(p for p, part in self.assignment.items() if part == partition)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "test_fraction": self.test_fraction,
            "val_fraction_of_remainder": self.val_fraction_of_remainder,
            "assignment": dict(sorted(self.assignment.items())),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "SplitManifest":
        return cls(
            seed=int(data["seed"]),
            test_fraction=float(data["test_fraction"]),
            val_fraction_of_remainder=float(data["val_fraction_of_remainder"]),
            assignment=dict(data["assignment"]),
        )


@dataclass(frozen=True)
class Finding:
    """A validation or curation observation. Data, not an error."""

    code: str
    message: str
    context: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class EvalReport:
    """SVI/MVI metrics for one (task, backend) pair.

    The confusion matrix is the plate-level (MVI) one; rows are truth
    labels, columns are predicted labels plus NO_DETECTION.
    """

    task: Task
    backend_id: str
    svi_accuracy: float
    mvi_accuracy: float
    unknown_rate_svi: float
    unknown_rate_mvi: float
    confusion_matrix: Mapping[str, Mapping[str, int]]
    per_class_accuracy: Mapping[str, float]
    images_evaluated: int
    plates_evaluated: int

    def __post_init__(self) -> None:
        for name in ("svi_accuracy", "mvi_accuracy", "unknown_rate_svi", "unknown_rate_mvi"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} outside [0, 1]: {value}")
