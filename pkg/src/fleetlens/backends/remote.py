"""HTTP client for a remote model server.

Wire protocol: POST <base-url>/v1/detect and /v1/classify with
{"image_id", "task", "image_b64", "top_k"}. 5xx and timeouts are retried
with capped exponential backoff and jitter; 4xx and malformed responses
are not.
"""

from __future__ import annotations

import base64
import random
import time
from pathlib import Path
from typing import Callable, Mapping

import httpx

from ..domain import BoundingBox, Detection, Task
from ..errors import BackendTimeout, BackendUnavailable, ProtocolError
from .base import BackendDescriptor, Ranking


class RemoteBackend:
    """Client for the /v1/detect and /v1/classify endpoints."""

    def __init__(
        self,
        base_url: str,
        task: Task,
        mode: str = "detect",
        top_k: int = 5,
        timeout: float = 10.0,
        max_retries: int = 3,
        backoff_base: float = 0.1,
        backoff_cap: float = 2.0,
        jitter: float = 0.2,
        sleep: Callable[[float], None] = time.sleep,
        client: httpx.Client | None = None,
    ):
        if top_k < 1:
            raise ValueError("top_k must be >= 1")
        self.descriptor = BackendDescriptor(
            backend_id=f"remote:{base_url}", task=task, mode=mode
        )
        self.base_url = base_url.rstrip("/")
        self.top_k = top_k
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.backoff_cap = backoff_cap
        self.jitter = jitter
        self._sleep = sleep
        self._jitter_rng = random.Random()
        self._client = client or httpx.Client(timeout=timeout)

    def close(self) -> None:
        self._client.close()

    def detect(self, image_ref: str, record_id: str) -> list[Detection]:
        payload = self._call("/v1/detect", image_ref, record_id)
        raw = payload.get("detections")
        if not isinstance(raw, list):
            raise ProtocolError(f"response for {record_id} lacks a detections array")
        return [_parse_detection(item, record_id) for item in raw]

    def classify(self, image_ref: str, record_id: str) -> Ranking:
        payload = self._call("/v1/classify", image_ref, record_id)
        raw = payload.get("ranking")
        if not isinstance(raw, list):
            raise ProtocolError(f"response for {record_id} lacks a ranking array")
        ranking = [_parse_rank_entry(item, record_id) for item in raw]
        confidences = [conf for _, conf in ranking]
        if confidences != sorted(confidences, reverse=True):
            raise ProtocolError(f"ranking for {record_id} is not sorted descending")
        return ranking

    def _call(self, endpoint: str, image_ref: str, record_id: str) -> Mapping:
        request = {
            "image_id": record_id,
            "task": self.descriptor.task.value,
            "image_b64": _encode_image(image_ref),
            "top_k": self.top_k,
        }
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            try:
                return self._once(endpoint, request, record_id)
            except (BackendUnavailable, BackendTimeout) as exc:
                last_error = exc
                if attempt < self.max_retries:
                    self._sleep(self._backoff(attempt))
        assert last_error is not None
        raise last_error

    def _once(self, endpoint: str, request: Mapping, record_id: str) -> Mapping:
        try:
            response = self._client.post(self.base_url + endpoint, json=request)
        except httpx.TimeoutException as exc:
            raise BackendTimeout(f"{endpoint} timed out for {record_id}") from exc
        except httpx.HTTPError as exc:
            raise BackendUnavailable(f"{endpoint} unreachable: {exc}") from exc
        if response.status_code >= 500:
            raise BackendUnavailable(
                f"{endpoint} returned {response.status_code} for {record_id}"
            )
        if response.status_code != 200:
            raise ProtocolError(
                f"{endpoint} returned {response.status_code} for {record_id}: "
                f"{response.text[:200]}"
            )
        try:
            payload = response.json()
        except ValueError as exc:
            raise ProtocolError(f"{endpoint} returned non-JSON for {record_id}") from exc
        if not isinstance(payload, dict):
            raise ProtocolError(f"{endpoint} returned a non-object payload for {record_id}")
        return payload

    def _backoff(self, attempt: int) -> float:
        delay = min(self.backoff_cap, self.backoff_base * (2**attempt))
        spread = self.jitter * (2 * self._jitter_rng.random() - 1)
        return max(0.0, delay * (1 + spread))


def _encode_image(image_ref: str) -> str:
    path = Path(image_ref)
    data = path.read_bytes() if path.is_file() else b""
    return base64.b64encode(data).decode("ascii")


def _confidence(value: object, record_id: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ProtocolError(f"non-numeric confidence for {record_id}: {value!r}")
    conf = float(value)
    if not 0.0 <= conf <= 1.0:
        raise ProtocolError(f"confidence outside [0, 1] for {record_id}: {conf}")
    return conf


def _parse_detection(item: Mapping, record_id: str) -> Detection:
    try:
        bbox_raw = item["bbox"]
        bbox = BoundingBox(bbox_raw["cx"], bbox_raw["cy"], bbox_raw["w"], bbox_raw["h"])
        return Detection(
            class_id=int(item["class_id"]),
            class_name=str(item["class_name"]),
            confidence=_confidence(item["confidence"], record_id),
            bbox=bbox,
        )
    except ProtocolError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed detection for {record_id}: {exc}") from exc


def _parse_rank_entry(item: Mapping, record_id: str) -> tuple[str, float]:
    try:
        return str(item["class_name"]), _confidence(item["confidence"], record_id)
    except ProtocolError:
        raise
    except (KeyError, TypeError) as exc:
        raise ProtocolError(f"malformed ranking entry for {record_id}: {exc}") from exc
