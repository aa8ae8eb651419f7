"""Persistent per-plate attribute index behind the query service.

Persistence is an append-only JSONL event log (tally upserts and
corrections) plus a snapshot that is a pure function of the log: replaying
the log always reproduces snapshot.json byte-for-byte. Sightings ride in a
separate records file since they are ingest metadata, not results.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .domain import (
    NO_DETECTION,
    Finding,
    ImageRecord,
    Prediction,
    Task,
    Taxonomy,
    VoteTally,
    format_rfc3339,
    parse_rfc3339,
)
from .errors import InvalidQuery, NotFound, StoreCorrupt, UnknownLabel
from .inference import prediction_to_row, tally_to_row

EVENTS_FILE = "events.jsonl"
SNAPSHOT_FILE = "snapshot.json"
RECORDS_FILE = "records.jsonl"
CONFIG_FILE = "config.json"

MAX_PAGE_LIMIT = 500


def _canonical(payload: Mapping) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _checksum(seq: int, kind: str, payload: Mapping) -> str:
    return hashlib.sha256(f"{seq}:{kind}:{_canonical(payload)}".encode()).hexdigest()


@dataclass(frozen=True)
class Query:
    """Conjunctive attribute search with paging.

    Label filters are per task; the time window and geographic box apply
    to sightings. At least one filter must be present.
    """

    make: frozenset[str] | None = None
    shape: frozenset[str] | None = None
    colour: frozenset[str] | None = None
    colour_binary: frozenset[str] | None = None
    captured_from: datetime | None = None
    captured_to: datetime | None = None
    lat_min: float | None = None
    lat_max: float | None = None
    lon_min: float | None = None
    lon_max: float | None = None
    include_unknown: bool = False
    offset: int = 0
    limit: int = 100

    def __post_init__(self) -> None:
        if self.offset < 0:
            raise InvalidQuery("offset must be >= 0")
        if not 1 <= self.limit <= MAX_PAGE_LIMIT:
            raise InvalidQuery(f"limit must be in [1, {MAX_PAGE_LIMIT}]")
        geo = (self.lat_min, self.lat_max, self.lon_min, self.lon_max)
        if any(g is not None for g in geo) and any(g is None for g in geo):
            raise InvalidQuery("geographic box needs all four bounds")
        if self.lat_min is not None and self.lat_min > self.lat_max:
            raise InvalidQuery("lat_min exceeds lat_max")
        if self.lon_min is not None and self.lon_min > self.lon_max:
            raise InvalidQuery("lon_min exceeds lon_max")
        if (
            self.captured_from is not None
            and self.captured_to is not None
            and self.captured_from > self.captured_to
        ):
            raise InvalidQuery("time window is reversed")
        if not self.label_filters() and not self.has_time_filter() and not self.has_geo_filter():
            raise InvalidQuery("query needs at least one filter")

    def label_filters(self) -> dict[Task, frozenset[str]]:
        filters = {}
        for task, labels in (
            (Task.MAKE, self.make),
            (Task.SHAPE, self.shape),
            (Task.COLOUR, self.colour),
            (Task.COLOUR_BINARY, self.colour_binary),
        ):
            if labels:
                filters[task] = labels
        return filters

    def has_time_filter(self) -> bool:
        return self.captured_from is not None or self.captured_to is not None

    def has_geo_filter(self) -> bool:
        return self.lat_min is not None

    def matches_sighting(self, captured_at: datetime, lat: float | None, lon: float | None) -> bool:
        if self.captured_from is not None and captured_at < self.captured_from:
            return False
        if self.captured_to is not None and captured_at > self.captured_to:
            return False
        if self.has_geo_filter():
            if lat is None or lon is None:
                return False
            if not (self.lat_min <= lat <= self.lat_max and self.lon_min <= lon <= self.lon_max):
                return False
        return True


class AttributeStore:
    """Event-sourced attribute index with a rebuildable snapshot.

    Many concurrent readers, a single serialized writer: all mutation
    happens under one lock and reads see a consistent in-memory state.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._seq = 0
        self._state: dict = {"plates": {}, "predictions": {}}
        self._sightings: dict[str, dict] = {}
        self._config: dict = {"active_backends": {}}
        self._load()

    # -- loading and persistence --

    def _load(self) -> None:
        events_path = self.root / EVENTS_FILE
        if events_path.is_file():
            with events_path.open() as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    event = json.loads(line)
                    self._verify(event)
                    self._apply(event)
                    self._seq = event["seq"]
        records_path = self.root / RECORDS_FILE
        if records_path.is_file():
            with records_path.open() as fh:
                for line in fh:
                    if line.strip():
                        row = json.loads(line)
                        self._sightings[row["record_id"]] = row
        config_path = self.root / CONFIG_FILE
        if config_path.is_file():
            self._config = json.loads(config_path.read_text())

    def _verify(self, event: Mapping) -> None:
        expected = _checksum(event["seq"], event["kind"], event["payload"])
        if event.get("checksum") != expected:
            raise StoreCorrupt(f"checksum mismatch at seq {event['seq']}")
        if event["seq"] != self._seq + 1:
            raise StoreCorrupt(f"sequence gap: expected {self._seq + 1}, got {event['seq']}")

    def _append(self, kind: str, payload: Mapping) -> None:
        seq = self._seq + 1
        event = {
            "seq": seq,
            "kind": kind,
            "payload": payload,
            "checksum": _checksum(seq, kind, payload),
        }
        with (self.root / EVENTS_FILE).open("a") as fh:
            fh.write(json.dumps(event) + "\n")
        self._apply(event)
        self._seq = seq
        self._write_snapshot()

    def _apply(self, event: Mapping) -> None:
        payload = event["payload"]
        if event["kind"] == "tally":
            self._apply_tally(payload)
        elif event["kind"] == "correction":
            self._apply_correction(payload)
        else:
            raise StoreCorrupt(f"unknown event kind {event['kind']!r}")

    def _apply_tally(self, payload: Mapping) -> None:
        tally = payload["tally"]
        plate = self._state["plates"].setdefault(tally["plate_id"], {"tasks": {}})
        task_state = plate["tasks"].setdefault(
            tally["task"], {"backends": {}, "corrections": []}
        )
        task_state["backends"][tally["backend_id"]] = {
            "winner": tally["winner"],
            "tie_broken": tally["tie_broken"],
            "counts": tally["counts"],
            "evidence": tally["evidence"],
        }
        for row in payload.get("predictions", []):
            key = f"{row['record_id']}|{row['task']}|{row['backend_id']}"
            self._state["predictions"][key] = row

    def _apply_correction(self, payload: Mapping) -> None:
        plate = self._state["plates"].setdefault(payload["plate_id"], {"tasks": {}})
        task_state = plate["tasks"].setdefault(
            payload["task"], {"backends": {}, "corrections": []}
        )
        task_state["corrections"].append(
            {
                "label": payload["label"],
                "author": payload["author"],
                "corrected_at": payload["corrected_at"],
            }
        )

    def _write_snapshot(self) -> None:
        (self.root / SNAPSHOT_FILE).write_bytes(self.snapshot_bytes())

    def snapshot_bytes(self) -> bytes:
        document = {"seq": self._seq, "state": self._state}
        return (json.dumps(document, sort_keys=True, indent=2) + "\n").encode()

    def rebuild_snapshot_bytes(self) -> bytes:
        """Replay the event log from scratch; must equal snapshot_bytes()."""
        fresh = AttributeStore.__new__(AttributeStore)
        fresh.root = self.root
        fresh._lock = threading.Lock()
        fresh._seq = 0
        fresh._state = {"plates": {}, "predictions": {}}
        fresh._sightings = {}
        fresh._config = {"active_backends": {}}
        events_path = self.root / EVENTS_FILE
        if events_path.is_file():
            with events_path.open() as fh:
                for line in fh:
                    if line.strip():
                        event = json.loads(line)
                        fresh._verify(event)
                        fresh._apply(event)
                        fresh._seq = event["seq"]
        return fresh.snapshot_bytes()

    # -- writes --

    def upsert_results(
        self,
        tallies: Sequence[VoteTally],
        predictions: Sequence[Prediction] = (),
    ) -> list[Finding]:
        """Apply tallies with their evidence predictions, idempotently.

        Re-applying an identical tally leaves the store (log included)
        unchanged. Evidence ids with no matching prediction are accepted
        but reported as dangling.
        """
        findings = []
        by_record = {}
        for p in predictions:
            by_record[f"{p.record_id}|{p.task.value}|{p.backend_id}"] = prediction_to_row(p)
        with self._lock:
            for tally in tallies:
                row = tally_to_row(tally)
                evidence_rows = []
                for record_id in tally.evidence:
                    key = f"{record_id}|{tally.task.value}|{tally.backend_id}"
                    if key in by_record:
                        evidence_rows.append(by_record[key])
                    elif key not in self._state["predictions"]:
                        findings.append(
                            Finding(
                                code="dangling-evidence",
                                message=(
                                    f"tally for plate {tally.plate_id} references "
                                    f"record {record_id} with no stored prediction"
                                ),
                                context={"plate_id": tally.plate_id, "record_id": record_id},
                            )
                        )
                payload = {"tally": row, "predictions": evidence_rows}
                if self._tally_is_current(payload):
                    continue
                self._append("tally", payload)
        return findings

    def _tally_is_current(self, payload: Mapping) -> bool:
        tally = payload["tally"]
        plate = self._state["plates"].get(tally["plate_id"], {})
        task_state = plate.get("tasks", {}).get(tally["task"], {})
        current = task_state.get("backends", {}).get(tally["backend_id"])
        if current != {
            "winner": tally["winner"],
            "tie_broken": tally["tie_broken"],
            "counts": tally["counts"],
            "evidence": tally["evidence"],
        }:
            return False
        for row in payload["predictions"]:
            key = f"{row['record_id']}|{row['task']}|{row['backend_id']}"
            if self._state["predictions"].get(key) != row:
                return False
        return True

    def submit_correction(
        self,
        plate_id: str,
        task: Task,
        label: str,
        author: str,
        taxonomy: Taxonomy | None = None,
        corrected_at: datetime | None = None,
    ) -> dict:
        """Append a human correction and return the updated profile.

        The label must be canonical in the task taxonomy (when one is
        supplied) or the NO_DETECTION sentinel. History is retained.
        """
        if label != NO_DETECTION and taxonomy is not None and label not in taxonomy.labels:
            raise UnknownLabel(f"{label!r} is not a canonical {task.value} label")
        with self._lock:
            if plate_id not in self._state["plates"]:
                raise NotFound(f"plate {plate_id} not in store")
            stamp = corrected_at or datetime.now(timezone.utc)
            payload = {
                "plate_id": plate_id,
                "task": task.value,
                "label": label,
                "author": author,
                "corrected_at": format_rfc3339(stamp),
            }
            self._append("correction", payload)
        return self.get_plate(plate_id)

    def register_records(self, records: Iterable[ImageRecord]) -> int:
        """Record sightings (idempotent by record_id); returns how many were new."""
        added = 0
        with self._lock:
            with (self.root / RECORDS_FILE).open("a") as fh:
                for record in records:
                    if record.record_id in self._sightings:
                        continue
                    row = {
                        "record_id": record.record_id,
                        "plate_id": record.plate_id,
                        "captured_at": format_rfc3339(record.captured_at),
                        "lat": record.lat,
                        "lon": record.lon,
                    }
                    fh.write(json.dumps(row) + "\n")
                    self._sightings[record.record_id] = row
                    added += 1
        return added

    def set_active_backend(self, task: Task, backend_id: str) -> None:
        with self._lock:
            self._config.setdefault("active_backends", {})[task.value] = backend_id
            (self.root / CONFIG_FILE).write_text(json.dumps(self._config, indent=2) + "\n")

    # -- reads --

    @property
    def plate_count(self) -> int:
        return len(self._state["plates"])

    def _active_backend(self, task_state: Mapping, task: str) -> str | None:
        configured = self._config.get("active_backends", {}).get(task)
        backends = task_state.get("backends", {})
        if configured and configured in backends:
            return configured
        if backends:
            return sorted(backends)[0]
        return None

    def effective_label(self, plate_id: str, task: Task) -> str | None:
        """Correction-aware label used for query matching; None if the
        plate has no result for the task."""
        plate = self._state["plates"].get(plate_id)
        if plate is None:
            return None
        task_state = plate["tasks"].get(task.value)
        if task_state is None:
            return None
        if task_state["corrections"]:
            return task_state["corrections"][-1]["label"]
        backend_id = self._active_backend(task_state, task.value)
        if backend_id is None:
            return None
        return task_state["backends"][backend_id]["winner"]

    def _plate_sightings(self, plate_id: str) -> list[dict]:
        rows = [r for r in self._sightings.values() if r["plate_id"] == plate_id]
        rows.sort(key=lambda r: (r["captured_at"], r["record_id"]))
        return [
            {"captured_at": r["captured_at"], "lat": r["lat"], "lon": r["lon"]} for r in rows
        ]

    def get_plate(self, plate_id: str, include_evidence: bool = True) -> dict:
        """Full profile: per-task winners, counts, corrections, sightings,
        and (optionally) the per-record evidence predictions."""
        plate = self._state["plates"].get(plate_id)
        if plate is None:
            raise NotFound(f"plate {plate_id} not in store")
        tasks = {}
        for task_name, task_state in sorted(plate["tasks"].items()):
            backend_id = self._active_backend(task_state, task_name)
            result = task_state["backends"].get(backend_id) if backend_id else None
            corrections = list(task_state["corrections"])
            entry = {
                "backend_id": backend_id,
                "winner": result["winner"] if result else None,
                "tie_broken": result["tie_broken"] if result else False,
                "counts": result["counts"] if result else {},
                "evidence": result["evidence"] if result else [],
                "correction": corrections[-1] if corrections else None,
                "corrections": corrections,
                "effective_label": self.effective_label(plate_id, Task(task_name)),
            }
            if include_evidence and result:
                rows = []
                for record_id in result["evidence"]:
                    key = f"{record_id}|{task_name}|{backend_id}"
                    if key in self._state["predictions"]:
                        rows.append(self._state["predictions"][key])
                entry["predictions"] = rows
            tasks[task_name] = entry
        return {
            "plate_id": plate_id,
            "tasks": tasks,
            "sightings": self._plate_sightings(plate_id),
        }

    def search(self, query: Query) -> tuple[int, list[dict]]:
        """Conjunctive filter over effective labels and sightings.

        Returns (total matches, page of profiles) ordered by most recent
        sighting, newest first, with plate_id as the stable tiebreak.
        """
        matches = []
        for plate_id in self._state["plates"]:
            if self._matches(plate_id, query):
                matches.append(plate_id)

        def sort_key(plate_id: str) -> tuple:
            sightings = self._plate_sightings(plate_id)
            if not sightings:
                return (1, 0.0, plate_id)
            newest = parse_rfc3339(sightings[-1]["captured_at"]).timestamp()
            return (0, -newest, plate_id)

        matches.sort(key=sort_key)
        page = matches[query.offset : query.offset + query.limit]
        return len(matches), [self.get_plate(p, include_evidence=False) for p in page]

    def _matches(self, plate_id: str, query: Query) -> bool:
        for task, wanted in query.label_filters().items():
            label = self.effective_label(plate_id, task)
            if label is None or label == NO_DETECTION:
                if not query.include_unknown:
                    return False
            elif label not in wanted:
                return False
        if query.has_time_filter() or query.has_geo_filter():
            for sighting in self._plate_sightings(plate_id):
                if query.matches_sighting(
                    parse_rfc3339(sighting["captured_at"]), sighting["lat"], sighting["lon"]
                ):
                    break
            else:
                return False
        return True
