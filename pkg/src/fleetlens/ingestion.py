"""Manifest loading, YOLO label parsing, plate grouping, dataset validation.

All operations here are pure per-file; callers may parallelize per file.
Outputs are sorted deterministically regardless of execution order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from .domain import BoundingBox, Finding, ImageRecord, Task, normalize_plate, parse_rfc3339
from .errors import DuplicateRecordId, ParseError

# Exact manifest header; empty string for absent optionals.
MANIFEST_HEADER = ["record_id", "plate_id", "image_path", "label_path", "captured_at", "lat", "lon"]

# Exact truth sidecar header: one (record, task) label per row.
TRUTH_HEADER = ["record_id", "task", "label"]

DATASET_PARTITIONS = ("train", "val", "test")


def load_manifest(path: str | Path) -> list[ImageRecord]:
    """Load image records from a manifest CSV, sorted by record_id.

    Plate ids are normalized on the way in. Raises ParseError with the
    offending line and column, or DuplicateRecordId.
    """
    path = Path(path)
    records: dict[str, ImageRecord] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty manifest", line=1) from None
        if header != MANIFEST_HEADER:
            raise ParseError(
                f"{path}: header {header!r} does not match {MANIFEST_HEADER!r}", line=1
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(MANIFEST_HEADER):
                raise ParseError(
                    f"{path}: expected {len(MANIFEST_HEADER)} columns, got {len(row)}",
                    line=lineno,
                )
            record = _parse_manifest_row(row, path=path, lineno=lineno)
            if record.record_id in records:
                raise DuplicateRecordId(
                    f"{path}: record_id {record.record_id!r} appears more than once"
                )
            records[record.record_id] = record
    return [records[k] for k in sorted(records)]


def _parse_manifest_row(row: list[str], *, path: Path, lineno: int) -> ImageRecord:
    record_id, plate_raw, image_path, label_path, captured_raw, lat_raw, lon_raw = row
    if not record_id:
        raise ParseError(f"{path}: empty record_id", line=lineno, column="record_id")
    try:
        plate_id = normalize_plate(plate_raw)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}", line=lineno, column="plate_id") from None
    if not image_path:
        raise ParseError(f"{path}: empty image_path", line=lineno, column="image_path")
    try:
        captured_at = parse_rfc3339(captured_raw)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}", line=lineno, column="captured_at") from None
    lat = lon = None
    if lat_raw or lon_raw:
        try:
            lat = float(lat_raw)
            lon = float(lon_raw)
        except ValueError:
            raise ParseError(
                f"{path}: lat/lon must both be decimal degrees or both empty",
                line=lineno,
                column="lat",
            ) from None
    try:
        return ImageRecord(
            record_id=record_id,
            plate_id=plate_id,
            image_ref=image_path,
            captured_at=captured_at,
            lat=lat,
            lon=lon,
            label_ref=label_path or None,
        )
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}", line=lineno) from None


def load_truth(path: str | Path) -> dict[str, dict[Task, str]]:
    """Load the ground-truth sidecar CSV: record_id,task,label rows."""
    path = Path(path)
    truth: dict[str, dict[Task, str]] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRUTH_HEADER:
            raise ParseError(f"{path}: header {header!r} does not match {TRUTH_HEADER!r}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"{path}: expected 3 columns, got {len(row)}", line=lineno)
            record_id, task_raw, label = row
            try:
                task = Task(task_raw)
            except ValueError:
                raise ParseError(
                    f"{path}: unknown task {task_raw!r}", line=lineno, column="task"
                ) from None
            if not label:
                raise ParseError(f"{path}: empty label", line=lineno, column="label")
            truth.setdefault(record_id, {})[task] = label
    return truth


def parse_yolo_label(text: str) -> list[tuple[int, BoundingBox]]:
    """Parse YOLO label text: one "class_id cx cy w h" tuple per non-empty line."""
    entries: list[tuple[int, BoundingBox]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        tokens = line.split()
        if len(tokens) != 5:
            raise ParseError(f"expected 5 tokens, got {len(tokens)}", line=lineno)
        try:
            class_id = int(tokens[0])
            coords = [float(t) for t in tokens[1:]]
        except ValueError:
            raise ParseError(f"non-numeric token in {line!r}", line=lineno) from None
        if class_id < 0:
            raise ParseError(f"class_id must be >= 0, got {class_id}", line=lineno)
        try:
            bbox = BoundingBox(*coords)
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        entries.append((class_id, bbox))
    return entries


def format_yolo_label(entries: list[tuple[int, BoundingBox]]) -> str:
    """Serialize label entries with 6-decimal fixed point and LF endings."""
    lines = [
        f"{class_id} {box.cx:.6f} {box.cy:.6f} {box.w:.6f} {box.h:.6f}"
        for class_id, box in entries
    ]
    return "".join(line + "\n" for line in lines)


@dataclass(frozen=True)
class PlateGroup:
    """All records of one plate, ordered by capture time."""

    plate_id: str
    records: tuple[ImageRecord, ...]

    def __post_init__(self) -> None:
        if not self.records:
            raise ValueError(f"plate group {self.plate_id} is empty")
        if any(r.plate_id != self.plate_id for r in self.records):
            raise ValueError(f"plate group {self.plate_id} contains foreign records")


def group_by_plate(records: list[ImageRecord]) -> list[PlateGroup]:
    """Partition records into per-plate groups, ordered by plate_id.

    Within a group, records are sorted by (captured_at, record_id).
    """
    by_plate: dict[str, list[ImageRecord]] = {}
    for record in records:
        by_plate.setdefault(record.plate_id, []).append(record)
    groups = []
    for plate_id in sorted(by_plate):
        ordered = sorted(by_plate[plate_id], key=lambda r: (r.captured_at, r.record_id))
        groups.append(PlateGroup(plate_id=plate_id, records=tuple(ordered)))
    return groups


@dataclass
class ValidationReport:
    """All violations found in a dataset directory. Findings are data."""

    root: Path
    findings: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings

    def add(self, code: str, message: str, **context: str) -> None:
        self.findings.append(Finding(code=code, message=message, context=context))


def validate_dataset_dir(root: str | Path) -> ValidationReport:
    """Check a YOLO-layout dataset tree for structural consistency.

    Collects every violation rather than stopping at the first; only real
    I/O failures raise.
    """
    root = Path(root)
    report = ValidationReport(root=root)

    classes_path = root / "classes.txt"
    num_classes = None
    if not classes_path.is_file():
        report.add("missing-classes", "classes.txt not found")
    else:
        class_lines = [l for l in classes_path.read_text().splitlines() if l.strip()]
        num_classes = len(class_lines)
        if num_classes == 0:
            report.add("empty-classes", "classes.txt has no labels")

    for partition in DATASET_PARTITIONS:
        images_dir = root / "images" / partition
        labels_dir = root / "labels" / partition
        image_stems = {p.stem for p in images_dir.iterdir()} if images_dir.is_dir() else set()
        label_stems = {p.stem for p in labels_dir.iterdir()} if labels_dir.is_dir() else set()

        for stem in sorted(image_stems - label_stems):
            report.add("missing-label", f"image {stem!r} has no label file", partition=partition)
        for stem in sorted(label_stems - image_stems):
            report.add("missing-image", f"label {stem!r} has no image file", partition=partition)

        if not labels_dir.is_dir():
            continue
        for label_path in sorted(labels_dir.iterdir()):
            try:
                entries = parse_yolo_label(label_path.read_text())
            except ParseError as exc:
                report.add(
                    "bad-label",
                    f"{label_path.name}: {exc}",
                    partition=partition,
                )
                continue
            if num_classes is None:
                continue
            for class_id, _ in entries:
                if class_id >= num_classes:
                    report.add(
                        "class-out-of-range",
                        f"{label_path.name}: class_id {class_id} >= {num_classes} classes",
                        partition=partition,
                    )
    return report
