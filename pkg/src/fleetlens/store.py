"""Pipeline workspace: records, taxonomies, and the split live here.

Layout under the store root:
  records.jsonl        ingested image records keyed by record_id
  split.json           the plate partition
  taxonomies/<task>.json
  query/               event-sourced attribute index (see querystore)
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Mapping

from .domain import (
    ImageRecord,
    SplitManifest,
    Task,
    Taxonomy,
    format_rfc3339,
    parse_rfc3339,
)

RECORDS_FILE = "records.jsonl"
SPLIT_FILE = "split.json"
TAXONOMY_DIR = "taxonomies"
QUERY_DIR = "query"


def record_to_row(record: ImageRecord) -> dict:
    return {
        "record_id": record.record_id,
        "plate_id": record.plate_id,
        "image_path": record.image_ref,
        "label_path": record.label_ref,
        "captured_at": format_rfc3339(record.captured_at),
        "lat": record.lat,
        "lon": record.lon,
        "ground_truth": {task.value: label for task, label in sorted(record.ground_truth.items())},
    }


def record_from_row(row: Mapping) -> ImageRecord:
    return ImageRecord(
        record_id=row["record_id"],
        plate_id=row["plate_id"],
        image_ref=row["image_path"],
        captured_at=parse_rfc3339(row["captured_at"]),
        lat=row.get("lat"),
        lon=row.get("lon"),
        label_ref=row.get("label_path"),
        ground_truth={Task(k): v for k, v in row.get("ground_truth", {}).items()},
    )


class PipelineStore:
    """File-backed workspace shared by the CLI subcommands."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    # -- records --

    def load_records(self) -> list[ImageRecord]:
        path = self.root / RECORDS_FILE
        if not path.is_file():
            return []
        records = []
        with path.open() as fh:
            for line in fh:
                if line.strip():
                    records.append(record_from_row(json.loads(line)))
        return records

    def add_records(self, records: Iterable[ImageRecord]) -> int:
        """Merge records by record_id; re-ingesting is a no-op. Ground
        truth attached earlier survives a re-ingest (manifests carry no
        truth columns). Returns the store size afterwards."""
        merged = {r.record_id: r for r in self.load_records()}
        for record in records:
            existing = merged.get(record.record_id)
            if existing is not None and existing.ground_truth and not record.ground_truth:
                record = ImageRecord(
                    record_id=record.record_id,
                    plate_id=record.plate_id,
                    image_ref=record.image_ref,
                    captured_at=record.captured_at,
                    lat=record.lat,
                    lon=record.lon,
                    label_ref=record.label_ref,
                    ground_truth=existing.ground_truth,
                )
            merged[record.record_id] = record
        self._write_records(merged)
        return len(merged)

    def attach_truth(self, truth: Mapping[str, Mapping[Task, str]]) -> int:
        """Attach ground-truth labels to existing records; returns how many
        records gained labels."""
        merged = {r.record_id: r for r in self.load_records()}
        touched = 0
        for record_id, labels in truth.items():
            record = merged.get(record_id)
            if record is None:
                continue
            combined = dict(record.ground_truth)
            combined.update(labels)
            merged[record_id] = ImageRecord(
                record_id=record.record_id,
                plate_id=record.plate_id,
                image_ref=record.image_ref,
                captured_at=record.captured_at,
                lat=record.lat,
                lon=record.lon,
                label_ref=record.label_ref,
                ground_truth=combined,
            )
            touched += 1
        self._write_records(merged)
        return touched

    def _write_records(self, merged: Mapping[str, ImageRecord]) -> None:
        path = self.root / RECORDS_FILE
        with path.open("w") as fh:
            for record_id in sorted(merged):
                fh.write(json.dumps(record_to_row(merged[record_id])) + "\n")

    # -- split --

    def save_split(self, split: SplitManifest) -> Path:
        path = self.root / SPLIT_FILE
        path.write_text(json.dumps(split.to_dict(), indent=2) + "\n")
        return path

    def load_split(self) -> SplitManifest:
        path = self.root / SPLIT_FILE
        if not path.is_file():
            raise FileNotFoundError(f"no split at {path}; run the split command first")
        return SplitManifest.from_dict(json.loads(path.read_text()))

    # -- taxonomies --

    def save_taxonomy(self, taxonomy: Taxonomy) -> Path:
        directory = self.root / TAXONOMY_DIR
        directory.mkdir(exist_ok=True)
        path = directory / f"{taxonomy.task.value}.json"
        path.write_text(json.dumps(taxonomy.to_dict(), indent=2) + "\n")
        return path

    def load_taxonomy(self, task: Task) -> Taxonomy:
        path = self.root / TAXONOMY_DIR / f"{task.value}.json"
        if not path.is_file():
            raise FileNotFoundError(
                f"no {task.value} taxonomy in store; pass one with --taxonomy"
            )
        return Taxonomy.from_dict(json.loads(path.read_text()))

    def load_taxonomies(self) -> dict[Task, Taxonomy]:
        taxonomies = {}
        directory = self.root / TAXONOMY_DIR
        if directory.is_dir():
            for path in sorted(directory.glob("*.json")):
                taxonomy = Taxonomy.from_dict(json.loads(path.read_text()))
                taxonomies[taxonomy.task] = taxonomy
        return taxonomies

    @property
    def query_root(self) -> Path:
        return self.root / QUERY_DIR
