"""Remote client protocol conformance against a scripted fake server."""

from __future__ import annotations

import base64

import pytest

from fleetlens.backends.remote import RemoteBackend
from fleetlens.domain import Task
from fleetlens.errors import BackendUnavailable, ProtocolError

from fakeserver import ScriptedServer


def detection_payload(image_id="r1", confidence=0.91):
    return {
        "image_id": image_id,
        "model_id": "test-model",
        "detections": [
            {
                "class_id": 3,
                "class_name": "Toyota",
                "confidence": confidence,
                "bbox": {"cx": 0.5, "cy": 0.5, "w": 0.4, "h": 0.3},
            }
        ],
    }


def backend_for(server, **kwargs):
    slept = []
    backend = RemoteBackend(
        base_url=server.url,
        task=Task.MAKE,
        backoff_base=0.001,
        sleep=slept.append,
        **kwargs,
    )
    return backend, slept


class TestDetectPath:
    def test_success_round_trip(self, tmp_path):
        image = tmp_path / "car.jpg"
        image.write_bytes(b"jpegbytes")
        with ScriptedServer() as server:
            server.push(200, detection_payload())
            backend, _ = backend_for(server)
            detections = backend.detect(str(image), "r1")
            backend.close()
        assert len(detections) == 1
        assert detections[0].class_name == "Toyota"
        assert detections[0].class_id == 3
        request = server.requests[0]
        assert request["path"] == "/v1/detect"
        assert request["body"]["image_id"] == "r1"
        assert request["body"]["task"] == "make"
        assert request["body"]["top_k"] == 5
        assert base64.b64decode(request["body"]["image_b64"]) == b"jpegbytes"

    def test_empty_detections_is_valid_no_detection(self):
        with ScriptedServer() as server:
            server.push(200, {"image_id": "r1", "model_id": "m", "detections": []})
            backend, _ = backend_for(server)
            assert backend.detect("missing.jpg", "r1") == []
            backend.close()

    def test_503_then_200_succeeds_after_retry(self):
        with ScriptedServer() as server:
            server.push(503, "unavailable")
            server.push(503, "unavailable")
            server.push(200, detection_payload())
            backend, slept = backend_for(server)
            detections = backend.detect("x.jpg", "r1")
            backend.close()
        assert len(detections) == 1
        assert len(server.requests) == 3
        assert len(slept) == 2  # one backoff per retry

    def test_exhausted_retries_raise_unavailable(self):
        with ScriptedServer() as server:
            for _ in range(4):
                server.push(503, "down")
            backend, slept = backend_for(server)
            with pytest.raises(BackendUnavailable):
                backend.detect("x.jpg", "r1")
            backend.close()
        assert len(server.requests) == 4  # initial try + 3 retries
        assert len(slept) == 3

    def test_400_is_not_retried(self):
        with ScriptedServer() as server:
            server.push(400, {"detail": "malformed"})
            backend, slept = backend_for(server)
            with pytest.raises(ProtocolError):
                backend.detect("x.jpg", "r1")
            backend.close()
        assert len(server.requests) == 1
        assert slept == []

    def test_422_unknown_task_is_protocol_error(self):
        with ScriptedServer() as server:
            server.push(422, {"detail": "unknown task"})
            backend, _ = backend_for(server)
            with pytest.raises(ProtocolError):
                backend.detect("x.jpg", "r1")
            backend.close()

    def test_confidence_outside_unit_interval(self):
        with ScriptedServer() as server:
            server.push(200, detection_payload(confidence=1.7))
            backend, _ = backend_for(server)
            with pytest.raises(ProtocolError):
                backend.detect("x.jpg", "r1")
            backend.close()

    def test_non_json_body_is_protocol_error(self):
        with ScriptedServer() as server:
            server.push(200, "this is not json")
            backend, _ = backend_for(server)
            with pytest.raises(ProtocolError):
                backend.detect("x.jpg", "r1")
            backend.close()

    def test_backoff_delays_grow_and_cap(self):
        with ScriptedServer() as server:
            for _ in range(4):
                server.push(503, "down")
            backend, slept = backend_for(server)
            backend.jitter = 0.0
            backend.backoff_base = 0.1
            backend.backoff_cap = 0.15
            with pytest.raises(BackendUnavailable):
                backend.detect("x.jpg", "r1")
            backend.close()
        assert slept == [0.1, 0.15, 0.15]


class TestClassifyPath:
    def test_ranking_round_trip(self):
        payload = {
            "image_id": "r1",
            "model_id": "m",
            "ranking": [
                {"class_name": "Toyota", "confidence": 0.8},
                {"class_name": "Mazda", "confidence": 0.15},
            ],
        }
        with ScriptedServer() as server:
            server.push(200, payload)
            backend, _ = backend_for(server, mode="classify")
            ranking = backend.classify("x.jpg", "r1")
            backend.close()
        assert ranking == [("Toyota", 0.8), ("Mazda", 0.15)]
        assert server.requests[0]["path"] == "/v1/classify"

    def test_unsorted_ranking_is_protocol_error(self):
        payload = {
            "image_id": "r1",
            "model_id": "m",
            "ranking": [
                {"class_name": "Mazda", "confidence": 0.15},
                {"class_name": "Toyota", "confidence": 0.8},
            ],
        }
        with ScriptedServer() as server:
            server.push(200, payload)
            backend, _ = backend_for(server, mode="classify")
            with pytest.raises(ProtocolError):
                backend.classify("x.jpg", "r1")
            backend.close()

    def test_malformed_confidence_type(self):
        payload = {
            "image_id": "r1",
            "model_id": "m",
            "ranking": [{"class_name": "Toyota", "confidence": "high"}],
        }
        with ScriptedServer() as server:
            server.push(200, payload)
            backend, _ = backend_for(server, mode="classify")
            with pytest.raises(ProtocolError):
                backend.classify("x.jpg", "r1")
            backend.close()


class TestTimeouts:
    def test_unreachable_host_is_retriable_unavailable(self):
        backend = RemoteBackend(
            base_url="http://127.0.0.1:9",  # discard port, nothing listens
            task=Task.MAKE,
            max_retries=1,
            backoff_base=0.001,
            sleep=lambda s: None,
        )
        with pytest.raises(BackendUnavailable):
            backend.detect("x.jpg", "r1")
        backend.close()
