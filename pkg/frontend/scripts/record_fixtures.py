"""Record query-service API responses into frontend/fixtures/.

Builds a small attribute store, serves it through the real application,
and freezes the JSON bodies the console contract tests run against.
Re-run after any API change: python3 scripts/record_fixtures.py
"""

from __future__ import annotations

import json
import tempfile
from datetime import datetime, timedelta, timezone
from pathlib import Path

from fastapi.testclient import TestClient

from fleetlens.domain import NO_DETECTION, ImageRecord, Prediction, Task, Taxonomy
from fleetlens.inference import tally_votes
from fleetlens.querystore import AttributeStore
from fleetlens.service import create_app

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
T0 = datetime(2025, 4, 1, 12, 0, 0, tzinfo=timezone.utc)

COLOURS = ("White", "Black", "Silver", "Grey", "Red", "Blue", "Green", "Brown", "Beige")
MAKES = ("BMW", "Ford", "Holden", "Mazda", "Mercedes", "Toyota")
SHAPES = ("sedan", "suv", "hatchback", "van", "truck", "ute")


def predictions_for(plate: str, task: Task, labels: list[str], confidences=None):
    confidences = confidences or [0.9] * len(labels)
    return [
        Prediction(
            record_id=f"{plate}v{i}",
            plate_id=plate,
            task=task,
            backend_id="sim:fixture",
            label=label,
            confidence=conf if label != NO_DETECTION else 0.0,
            produced_at=T0,
        )
        for i, (label, conf) in enumerate(zip(labels, confidences))
    ]


def build_store(root: Path) -> AttributeStore:
    store = AttributeStore(root)
    layout = {
        # Fig.-3-style plate: Mercedes three of four votes
        "XTK-482": {
            Task.MAKE: ["Mercedes", "Mercedes", "Mercedes", NO_DETECTION],
            Task.COLOUR: ["Silver", "Silver", "Silver", "Silver"],
        },
        "QRV-771": {
            Task.MAKE: ["Toyota", "Toyota", "Mazda"],
            Task.COLOUR: ["Red", "Red", "Maroon"],
        },
        "LMB-904": {
            Task.MAKE: [NO_DETECTION, NO_DETECTION],
            Task.COLOUR: ["Red", "Red"],
        },
        # count tie broken by summed confidence -> tie badge
        "JJD-230": {
            Task.MAKE: ["Toyota", "Toyota", "Mazda", "Mazda"],
            Task.COLOUR: ["White", "White", "White", "White"],
        },
    }
    confidences = {("JJD-230", Task.MAKE): [0.6, 0.6, 0.9, 0.9]}
    tallies, predictions = [], []
    for plate, tasks in layout.items():
        for task, labels in tasks.items():
            canonical = ["Red" if l == "Maroon" else l for l in labels]
            preds = predictions_for(
                plate, task, canonical, confidences.get((plate, task))
            )
            tallies.append(tally_votes(preds))
            predictions.extend(preds)
    store.upsert_results(tallies, predictions)

    records = []
    for i, plate in enumerate(layout):
        for view in range(2):
            records.append(
                ImageRecord(
                    record_id=f"{plate}s{view}",
                    plate_id=plate,
                    image_ref=f"{plate}-{view}.jpg",
                    captured_at=T0 + timedelta(minutes=10 * i + view),
                    lat=-33.86 + i * 0.01,
                    lon=151.20 + view * 0.01,
                )
            )
    store.register_records(records)
    return store


def taxonomies() -> dict[Task, Taxonomy]:
    bright_dark = {c: ("bright" if c in ("White", "Silver", "Beige", "Red") else "dark")
                   for c in COLOURS}
    return {
        Task.MAKE: Taxonomy(task=Task.MAKE, labels=MAKES, merge_map={"Merc": "Mercedes"}),
        Task.SHAPE: Taxonomy(task=Task.SHAPE, labels=SHAPES),
        Task.COLOUR: Taxonomy(
            task=Task.COLOUR, labels=COLOURS,
            merge_map={"Maroon": "Red", "Gold": "Beige"},
        ),
        Task.COLOUR_BINARY: Taxonomy(
            task=Task.COLOUR_BINARY, labels=("bright", "dark"), binary_map=bright_dark
        ),
    }


def record(client: TestClient) -> None:
    FIXTURES.mkdir(exist_ok=True)

    def save(name: str, response) -> None:
        assert response.status_code in (200, 404, 422), (name, response.status_code)
        payload = {"status": response.status_code, "body": response.json()}
        (FIXTURES / name).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        print(f"recorded {name} ({response.status_code})")

    save("health.json", client.get("/v1/health"))
    save("taxonomies.json", client.get("/v1/taxonomies"))
    save("search_red.json", client.get("/v1/search", params={"colour": "Red"}))
    save("search_toyota.json", client.get("/v1/search", params={"make": "Toyota"}))
    save(
        "search_toyota_unknown.json",
        client.get("/v1/search", params={"make": "Toyota", "include_unknown": "true"}),
    )
    save("search_mercedes.json", client.get("/v1/search", params={"make": "Mercedes"}))
    save("search_empty.json", client.get("/v1/search", params={"colour": "Green"}))
    save("plate_xtk482.json", client.get("/v1/plates/XTK-482"))
    save("plate_jjd230.json", client.get("/v1/plates/JJD-230"))
    save("plate_missing.json", client.get("/v1/plates/ZZZ-000"))
    save(
        "correction_xtk482.json",
        client.post(
            "/v1/corrections",
            json={
                "plate_id": "XTK-482",
                "task": "colour",
                "label": "White",
                "author": "console-fixture",
            },
        ),
    )
    save(
        "correction_rejected.json",
        client.post(
            "/v1/corrections",
            json={
                "plate_id": "XTK-482",
                "task": "colour",
                "label": "Chartreuse",
                "author": "console-fixture",
            },
        ),
    )


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        store = build_store(Path(tmp))
        app = create_app(store, taxonomies())
        record(TestClient(app))


if __name__ == "__main__":
    main()
