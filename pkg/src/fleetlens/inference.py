"""Single-view prediction and per-plate multi-view majority voting.

SVI: each image is scored on its own; the top-1 hypothesis (highest
confidence) becomes the image's label, or NO_DETECTION when the backend
returned nothing. MVI: all predictions sharing a plate vote, the plurality
label wins; NO_DETECTION never beats a real label and wins only when it is
the sole outcome.
"""

from __future__ import annotations

import json
from collections import Counter
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from .backends.base import DetectorBackend, Ranking
from .backends.batch import run_batch
from .domain import (
    NO_DETECTION,
    Detection,
    ImageRecord,
    Prediction,
    Task,
    Taxonomy,
    VoteTally,
    canonicalize,
    format_rfc3339,
    parse_rfc3339,
)
from .errors import MixedGroup


def predict_single(
    output: Sequence[Detection] | Ranking,
    *,
    record_id: str,
    plate_id: str,
    task: Task,
    taxonomy: Taxonomy,
    backend_id: str,
    produced_at: datetime,
) -> Prediction:
    """Collapse one backend output into the image's final label.

    Detect mode takes the max-confidence detection (ties: larger area,
    then lower class_id); classify mode takes rank 1. Empty output becomes
    NO_DETECTION with zero confidence. Labels are canonicalized through
    the taxonomy, so alias outputs (e.g. Maroon) land on their canonical
    class.
    """
    if not output:
        label, confidence = NO_DETECTION, 0.0
    elif isinstance(output[0], Detection):
        top = max(output, key=lambda d: (d.confidence, d.bbox.area, -d.class_id))
        label, confidence = canonicalize(taxonomy, top.class_name), top.confidence
    else:
        raw_label, confidence = output[0]
        label = canonicalize(taxonomy, raw_label)
    return Prediction(
        record_id=record_id,
        plate_id=plate_id,
        task=task,
        backend_id=backend_id,
        label=label,
        confidence=confidence,
        produced_at=produced_at,
    )


def tally_votes(predictions: Sequence[Prediction]) -> VoteTally:
    """Majority vote over one plate's predictions.

    Winner is the plurality among real labels; NO_DETECTION wins only as
    the sole outcome. Count ties among real labels are broken by greater
    summed confidence, then the lexicographically smaller label, and
    flagged via tie_broken.
    """
    if not predictions:
        raise MixedGroup("cannot tally an empty prediction group")
    keys = {(p.plate_id, p.task, p.backend_id) for p in predictions}
    if len(keys) != 1:
        raise MixedGroup(f"predictions mix plate/task/backend: {sorted(map(str, keys))}")
    plate_id, task, backend_id = next(iter(keys))

    counts = Counter(p.label for p in predictions)
    real = [label for label in counts if label != NO_DETECTION]
    tie_broken = False
    if real:
        confidence_sum: dict[str, float] = {label: 0.0 for label in real}
        for p in predictions:
            if p.label != NO_DETECTION:
                confidence_sum[p.label] += p.confidence
        top_count = max(counts[label] for label in real)
        contenders = [label for label in real if counts[label] == top_count]
        tie_broken = len(contenders) > 1
        winner = sorted(contenders, key=lambda l: (-confidence_sum[l], l))[0]
    else:
        winner = NO_DETECTION

    return VoteTally(
        plate_id=plate_id,
        task=task,
        backend_id=backend_id,
        counts=dict(counts),
        winner=winner,
        tie_broken=tie_broken,
        evidence=tuple(sorted(p.record_id for p in predictions)),
    )


def run_svi(
    backend: DetectorBackend,
    records: list[ImageRecord],
    taxonomy: Taxonomy,
    out_path: str | Path | None = None,
    parallelism: int = 1,
    produced_at: datetime | None = None,
) -> list[Prediction]:
    """One prediction per record, in record_id order.

    Backend failures and out-of-taxonomy outputs do not abort the run:
    they become NO_DETECTION predictions carrying an error annotation.
    """
    task = backend.descriptor.task
    backend_id = backend.descriptor.backend_id
    stamp = produced_at or datetime.now(timezone.utc)
    by_id = {r.record_id: r for r in records}

    predictions = []
    for item in run_batch(backend, records, parallelism=parallelism):
        record = by_id[item.record_id]
        try:
            if item.error is not None:
                raise item.error
            prediction = predict_single(
                item.result,
                record_id=record.record_id,
                plate_id=record.plate_id,
                task=task,
                taxonomy=taxonomy,
                backend_id=backend_id,
                produced_at=stamp,
            )
        except Exception as exc:
            prediction = Prediction(
                record_id=record.record_id,
                plate_id=record.plate_id,
                task=task,
                backend_id=backend_id,
                label=NO_DETECTION,
                confidence=0.0,
                produced_at=stamp,
                error=f"{type(exc).__name__}: {exc}",
            )
        predictions.append(prediction)

    if out_path is not None:
        write_predictions_jsonl(predictions, out_path)
    return predictions


def run_mvi(
    predictions: Iterable[Prediction], out_path: str | Path | None = None
) -> list[VoteTally]:
    """Exactly one tally per distinct plate, in plate_id order.

    Order-independent: a permuted prediction stream yields identical
    tallies.
    """
    groups: dict[str, list[Prediction]] = {}
    for p in predictions:
        groups.setdefault(p.plate_id, []).append(p)
    tallies = [tally_votes(groups[plate_id]) for plate_id in sorted(groups)]
    if out_path is not None:
        write_tallies_jsonl(tallies, out_path)
    return tallies


# --- JSONL wire formats ---

def prediction_to_row(p: Prediction) -> dict:
    return {
        "record_id": p.record_id,
        "plate_id": p.plate_id,
        "task": p.task.value,
        "backend_id": p.backend_id,
        "label": p.label,
        "confidence": p.confidence,
        "no_detection": p.no_detection,
        "error": p.error,
        "produced_at": format_rfc3339(p.produced_at),
    }


def prediction_from_row(row: dict) -> Prediction:
    return Prediction(
        record_id=row["record_id"],
        plate_id=row["plate_id"],
        task=Task(row["task"]),
        backend_id=row["backend_id"],
        label=row["label"],
        confidence=float(row["confidence"]),
        produced_at=parse_rfc3339(row["produced_at"]),
        error=row.get("error"),
    )


def tally_to_row(t: VoteTally) -> dict:
    return {
        "plate_id": t.plate_id,
        "task": t.task.value,
        "backend_id": t.backend_id,
        "counts": {label: t.counts[label] for label in sorted(t.counts)},
        "winner": t.winner,
        "tie_broken": t.tie_broken,
        "evidence": list(t.evidence),
    }


def tally_from_row(row: dict) -> VoteTally:
    return VoteTally(
        plate_id=row["plate_id"],
        task=Task(row["task"]),
        backend_id=row["backend_id"],
        counts={label: int(count) for label, count in row["counts"].items()},
        winner=row["winner"],
        tie_broken=bool(row["tie_broken"]),
        evidence=tuple(row["evidence"]),
    )


def write_predictions_jsonl(predictions: Iterable[Prediction], path: str | Path) -> None:
    _write_jsonl((prediction_to_row(p) for p in predictions), path)


def read_predictions_jsonl(path: str | Path) -> list[Prediction]:
    return [prediction_from_row(row) for row in _read_jsonl(path)]


def write_tallies_jsonl(tallies: Iterable[VoteTally], path: str | Path) -> None:
    _write_jsonl((tally_to_row(t) for t in tallies), path)


def read_tallies_jsonl(path: str | Path) -> list[VoteTally]:
    return [tally_from_row(row) for row in _read_jsonl(path)]


def _write_jsonl(rows: Iterable[dict], path: str | Path) -> None:
    with Path(path).open("w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def _read_jsonl(path: str | Path) -> Iterable[dict]:
    with Path(path).open() as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)
