"""Bounded-parallelism batch fan-out over a backend."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from ..domain import Detection, ImageRecord
from .base import DetectorBackend, Ranking


@dataclass(frozen=True)
class BatchItem:
    """Per-record batch outcome: either a result or the error that ended it."""

    record_id: str
    result: list[Detection] | Ranking | None = None
    error: Exception | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def run_batch(
    backend: DetectorBackend, records: list[ImageRecord], parallelism: int = 1
) -> list[BatchItem]:
    """Run the backend over all records with at most ``parallelism`` workers.

    The output is sorted by record_id and therefore independent of
    scheduling; failed records carry their error instead of aborting the
    batch.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    call = backend.detect if backend.descriptor.mode == "detect" else backend.classify

    def one(record: ImageRecord) -> BatchItem:
        try:
            return BatchItem(record_id=record.record_id, result=call(record.image_ref, record.record_id))
        except Exception as exc:
            return BatchItem(record_id=record.record_id, error=exc)

    if parallelism == 1 or len(records) <= 1:
        items = [one(r) for r in records]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            items = list(pool.map(one, records))
    return sorted(items, key=lambda item: item.record_id)
