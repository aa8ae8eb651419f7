"""Dataset curation: primary-detection selection, plate-conflict removal,
class merging and frequency filtering, plate-disjoint splitting, and
task-specific dataset building with identical filters on every partition.
"""

from __future__ import annotations

import json
import math
import random
import shutil
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .domain import (
    BoundingBox,
    Detection,
    Finding,
    ImageRecord,
    SplitManifest,
    Task,
    Taxonomy,
    canonicalize,
)
from .errors import DegenerateSplit, EmptyInput, EmptyPartition, ParseError, UnknownLabel
from .ingestion import PlateGroup, format_yolo_label, parse_yolo_label

PROVENANCE_HEADER = "stem,record_id,plate_id,partition"

# Fallback when a record carries no parsable bbox: the vehicle is assumed to
# dominate the frame.
FULL_FRAME = BoundingBox(0.5, 0.5, 1.0, 1.0)


def select_primary_detection(detections: list[Detection]) -> Detection:
    """Pick the detection with the largest bbox area.

    Ties go to the higher confidence, then the lower class_id.
    """
    if not detections:
        raise EmptyInput("no detections to select from")
    return max(detections, key=lambda d: (d.bbox.area, d.confidence, -d.class_id))


def detect_plate_conflicts(
    groups: list[PlateGroup], task: Task, taxonomy: Taxonomy
) -> list[str]:
    """Plates whose records disagree on the canonical ground-truth label.

    Labels are canonicalized before comparison, so merged aliases
    (Maroon vs Red) do not count as a conflict.
    """
    conflicted = []
    for group in groups:
        seen = set()
        for record in group.records:
            raw = record.ground_truth.get(task)
            if raw is None:
                continue
            seen.add(canonicalize(taxonomy, raw))
        if len(seen) >= 2:
            conflicted.append(group.plate_id)
    return sorted(conflicted)


@dataclass
class FrequencyFilterResult:
    kept_labels: set[str]
    dropped_plates: list[str]
    findings: list[Finding] = field(default_factory=list)


def filter_low_frequency(
    plate_labels: Mapping[str, str], min_plate_frequency: int
) -> FrequencyFilterResult:
    """Drop labels supported by fewer than ``min_plate_frequency`` plates.

    Frequency is counted at the plate level, not the image level; plates of
    a dropped label are dropped with it.
    """
    support = Counter(plate_labels.values())
    kept = {label for label, count in support.items() if count >= min_plate_frequency}
    dropped = sorted(p for p, label in plate_labels.items() if label not in kept)
    findings = []
    if plate_labels and not kept:
        findings.append(
            Finding(
                code="all-labels-dropped",
                message=f"no label reaches the plate-frequency threshold {min_plate_frequency}",
            )
        )
    return FrequencyFilterResult(kept_labels=kept, dropped_plates=dropped, findings=findings)


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def make_split(
    plates: Iterable[str],
    seed: int,
    test_fraction: float = 0.30,
    val_fraction_of_remainder: float = 0.20,
    allow_degenerate: bool = False,
) -> SplitManifest:
    """Deterministic plate-disjoint split.

    Seeded Fisher-Yates shuffle over the lexicographically sorted plate
    list, so the result is independent of input order. Partition sizes use
    nearest-integer rounding with ties toward test, then val.
    """
    plate_list = list(plates)
    if len(set(plate_list)) != len(plate_list):
        raise ValueError("plates must be distinct")
    ordered = sorted(plate_list)
    rng = random.Random(seed)
    rng.shuffle(ordered)

    n = len(ordered)
    n_test = _round_half_up(n * test_fraction)
    n_val = _round_half_up((n - n_test) * val_fraction_of_remainder)
    test = ordered[:n_test]
    val = ordered[n_test : n_test + n_val]
    train = ordered[n_test + n_val :]

    if n > 0 and not (test and val and train):
        if not allow_degenerate:
            raise DegenerateSplit(
                f"{n} plates cannot fill all partitions "
                f"(test={len(test)}, val={len(val)}, train={len(train)})"
            )
        test, val, train = [], [], ordered

    assignment: dict[str, str] = {}
    for plate in train:
        assignment[plate] = "train"
    for plate in val:
        assignment[plate] = "val"
    for plate in test:
        assignment[plate] = "test"
    return SplitManifest(
        seed=seed,
        test_fraction=test_fraction,
        val_fraction_of_remainder=val_fraction_of_remainder,
        assignment=assignment,
    )


def check_leakage(
    split: SplitManifest, datasets: list[Mapping[str, Iterable[str]]]
) -> list[Finding]:
    """Verify no plate occurs in more than one partition.

    Each dataset is a mapping partition -> plate ids present there; the
    split's own assignment is treated as one more evidence source, so a
    dataset that contradicts the split is also flagged. One finding per
    leaking plate.
    """
    observed: dict[str, set[str]] = {}
    for plate, partition in split.assignment.items():
        observed.setdefault(plate, set()).add(partition)
    for dataset in datasets:
        for partition, plate_ids in dataset.items():
            for plate in plate_ids:
                observed.setdefault(plate, set()).add(partition)

    findings = []
    for plate in sorted(observed):
        partitions = observed[plate]
        if len(partitions) > 1:
            findings.append(
                Finding(
                    code="leak",
                    message=f"plate {plate} appears in partitions {sorted(partitions)}",
                    context={"plate_id": plate, "partitions": ",".join(sorted(partitions))},
                )
            )
    return findings


def load_dataset_provenance(root: str | Path) -> dict[str, list[str]]:
    """Read partition -> plate ids from a built dataset's provenance.csv."""
    path = Path(root) / "provenance.csv"
    partitions: dict[str, list[str]] = {}
    lines = path.read_text().splitlines()
    if not lines or lines[0] != PROVENANCE_HEADER:
        raise ParseError(f"{path}: bad provenance header", line=1)
    for line in lines[1:]:
        if not line:
            continue
        _, _, plate_id, partition = line.split(",")
        partitions.setdefault(partition, []).append(plate_id)
    return partitions


@dataclass
class DatasetPlan:
    """The curated, partitioned view of one task dataset. Pure metadata."""

    task: Task
    classes: list[str]
    plate_label: dict[str, str]
    partition_records: dict[str, list[ImageRecord]]
    record_label: dict[str, str]
    conflict_plates: list[str]
    dropped_lowfreq_plates: list[str]
    findings: list[Finding] = field(default_factory=list)

    def summary(self) -> "DatasetSummary":
        per_partition = {}
        for partition, records in self.partition_records.items():
            per_partition[partition] = {
                "images": len(records),
                "plates": len({r.plate_id for r in records}),
            }
        return DatasetSummary(
            task=self.task,
            classes=list(self.classes),
            partitions=per_partition,
            findings=list(self.findings),
        )


@dataclass
class DatasetSummary:
    """Counts in the shape of the dataset summary table: classes, then
    images and plates per partition."""

    task: Task
    classes: list[str]
    partitions: dict[str, dict[str, int]]
    findings: list[Finding] = field(default_factory=list)

    @property
    def total_plates(self) -> int:
        return sum(p["plates"] for p in self.partitions.values())

    @property
    def total_images(self) -> int:
        return sum(p["images"] for p in self.partitions.values())

    def to_dict(self) -> dict:
        return {
            "dataset": self.task.value,
            "total_classes": len(self.classes),
            "total_plates": self.total_plates,
            "total_images": self.total_images,
            "classes": list(self.classes),
            "partitions": {
                name: dict(counts) for name, counts in sorted(self.partitions.items())
            },
            "findings": [
                {"code": f.code, "message": f.message, "context": dict(f.context)}
                for f in self.findings
            ],
        }


def plan_task_dataset(
    task: Task,
    records: list[ImageRecord],
    taxonomy: Taxonomy,
    split: SplitManifest,
) -> DatasetPlan:
    """Apply canonicalization, conflict removal, frequency filtering, and
    train-coverage filtering identically to all partitions.

    Guarantees that the classes present in val/test are a subset of the
    classes present in train.
    """
    findings: list[Finding] = []

    labelled: list[tuple[ImageRecord, str]] = []
    for record in records:
        raw = record.ground_truth.get(task)
        if raw is None:
            continue
        try:
            label = canonicalize(taxonomy, raw)
        except UnknownLabel:
            findings.append(
                Finding(
                    code="unknown-label",
                    message=f"record {record.record_id}: label {raw!r} outside taxonomy",
                    context={"record_id": record.record_id},
                )
            )
            continue
        if record.plate_id not in split.assignment:
            findings.append(
                Finding(
                    code="unassigned-plate",
                    message=f"plate {record.plate_id} is not in the split",
                    context={"plate_id": record.plate_id},
                )
            )
            continue
        labelled.append((record, label))

    # Conflict removal: plates whose images disagree on the canonical label.
    votes: dict[str, set[str]] = {}
    for record, label in labelled:
        votes.setdefault(record.plate_id, set()).add(label)
    conflict_plates = sorted(p for p, labels in votes.items() if len(labels) >= 2)
    for plate in conflict_plates:
        findings.append(
            Finding(
                code="plate-conflict",
                message=f"plate {plate} carries conflicting {task.value} labels",
                context={"plate_id": plate},
            )
        )
    conflict_set = set(conflict_plates)
    labelled = [(r, l) for r, l in labelled if r.plate_id not in conflict_set]

    plate_label = {r.plate_id: l for r, l in labelled}
    freq = filter_low_frequency(plate_label, taxonomy.min_plate_frequency)
    findings.extend(freq.findings)
    dropped_lowfreq = set(freq.dropped_plates)
    labelled = [(r, l) for r, l in labelled if r.plate_id not in dropped_lowfreq]

    # Train-coverage filter: a class with no train plates cannot appear in
    # val/test either.
    train_classes = {
        l for r, l in labelled if split.assignment[r.plate_id] == "train"
    }
    uncovered = {l for _, l in labelled} - train_classes
    if uncovered:
        for label in sorted(uncovered):
            findings.append(
                Finding(
                    code="no-train-coverage",
                    message=f"class {label!r} has no train plates and was dropped",
                    context={"label": label},
                )
            )
        labelled = [(r, l) for r, l in labelled if l in train_classes]

    classes = [l for l in taxonomy.labels if l in train_classes]
    partition_records: dict[str, list[ImageRecord]] = {p: [] for p in SplitManifest.PARTITIONS}
    for record, _ in sorted(labelled, key=lambda pair: pair[0].record_id):
        partition_records[split.assignment[record.plate_id]].append(record)

    return DatasetPlan(
        task=task,
        classes=classes,
        plate_label={r.plate_id: l for r, l in labelled},
        partition_records=partition_records,
        record_label={r.record_id: l for r, l in labelled},
        conflict_plates=conflict_plates,
        dropped_lowfreq_plates=sorted(dropped_lowfreq),
        findings=findings,
    )


def _record_bbox(record: ImageRecord, image_root: Path | None, plan: DatasetPlan) -> BoundingBox:
    """Primary vehicle bbox from the record's label file, by the
    largest-area rule; full-frame fallback when no box is available."""
    if record.label_ref is None:
        return FULL_FRAME
    label_path = Path(record.label_ref)
    if image_root is not None and not label_path.is_absolute():
        label_path = image_root / label_path
    if not label_path.is_file():
        return FULL_FRAME
    try:
        entries = parse_yolo_label(label_path.read_text())
    except ParseError as exc:
        plan.findings.append(
            Finding(
                code="bad-source-label",
                message=f"record {record.record_id}: {exc}",
                context={"record_id": record.record_id},
            )
        )
        return FULL_FRAME
    if not entries:
        return FULL_FRAME
    detections = [
        Detection(class_id=cid, class_name=str(cid), confidence=1.0, bbox=box)
        for cid, box in entries
    ]
    return select_primary_detection(detections).bbox


def build_task_dataset(
    task: Task,
    records: list[ImageRecord],
    taxonomy: Taxonomy,
    split: SplitManifest,
    out_dir: str | Path,
    image_root: str | Path | None = None,
) -> DatasetSummary:
    """Write a YOLO-layout dataset for one task and return its summary.

    Layout: images/{train,val,test}/<record_id>.<ext>,
    labels/{train,val,test}/<record_id>.txt, classes.txt, split.json,
    provenance.csv, summary.json.
    """
    out_dir = Path(out_dir)
    image_root = Path(image_root) if image_root is not None else None
    plan = plan_task_dataset(task, records, taxonomy, split)

    class_ids = {label: i for i, label in enumerate(plan.classes)}
    provenance_rows: list[str] = []
    built: dict[str, list[ImageRecord]] = {p: [] for p in SplitManifest.PARTITIONS}

    for partition in SplitManifest.PARTITIONS:
        (out_dir / "images" / partition).mkdir(parents=True, exist_ok=True)
        (out_dir / "labels" / partition).mkdir(parents=True, exist_ok=True)

    for partition, partition_records in plan.partition_records.items():
        for record in partition_records:
            src = Path(record.image_ref)
            if image_root is not None and not src.is_absolute():
                src = image_root / src
            if not src.is_file():
                plan.findings.append(
                    Finding(
                        code="missing-image",
                        message=f"record {record.record_id}: image {src} not found",
                        context={"record_id": record.record_id},
                    )
                )
                continue
            stem = record.record_id
            shutil.copyfile(src, out_dir / "images" / partition / (stem + src.suffix))
            bbox = _record_bbox(record, image_root, plan)
            class_id = class_ids[plan.record_label[record.record_id]]
            label_text = format_yolo_label([(class_id, bbox)])
            (out_dir / "labels" / partition / f"{stem}.txt").write_text(label_text)
            provenance_rows.append(f"{stem},{record.record_id},{record.plate_id},{partition}")
            built[partition].append(record)

    empty = [p for p, rs in built.items() if not rs]
    if empty:
        raise EmptyPartition(f"partitions {empty} have no usable {task.value} records")

    (out_dir / "classes.txt").write_text("".join(c + "\n" for c in plan.classes))
    (out_dir / "split.json").write_text(json.dumps(split.to_dict(), indent=2) + "\n")
    (out_dir / "provenance.csv").write_text(
        "".join(line + "\n" for line in [PROVENANCE_HEADER, *provenance_rows])
    )

    summary = DatasetPlan(
        task=plan.task,
        classes=plan.classes,
        plate_label=plan.plate_label,
        partition_records=built,
        record_label=plan.record_label,
        conflict_plates=plan.conflict_plates,
        dropped_lowfreq_plates=plan.dropped_lowfreq_plates,
        findings=plan.findings,
    ).summary()
    (out_dir / "summary.json").write_text(json.dumps(summary.to_dict(), indent=2) + "\n")
    return summary
