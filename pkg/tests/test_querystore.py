"""Event-sourced attribute store: replay, idempotence, search."""

from __future__ import annotations

import json
from datetime import datetime, timezone

import pytest

from fleetlens.domain import NO_DETECTION, Prediction, Task
from fleetlens.errors import InvalidQuery, NotFound, StoreCorrupt, UnknownLabel
from fleetlens.inference import tally_votes
from fleetlens.querystore import AttributeStore, Query

from conftest import make_record

STAMP = datetime(2025, 4, 2, 9, 0, 0, tzinfo=timezone.utc)
CORRECTION_STAMP = datetime(2025, 4, 3, 10, 0, 0, tzinfo=timezone.utc)


def pred(record_id, plate, label, task=Task.COLOUR, backend="mock:x", confidence=0.9):
    return Prediction(
        record_id=record_id,
        plate_id=plate,
        task=task,
        backend_id=backend,
        label=label,
        confidence=confidence if label != NO_DETECTION else 0.0,
        produced_at=STAMP,
    )


def plate_results(plate, labels, task=Task.COLOUR, backend="mock:x"):
    predictions = [
        pred(f"{plate}v{i}", plate, label, task=task, backend=backend)
        for i, label in enumerate(labels)
    ]
    return tally_votes(predictions), predictions


def populate(store):
    """Ten plates with colour winners; two also carry make winners."""
    colour_layout = {
        "P00": ["Red", "Red", "Red"],
        "P01": ["Red", "Red", NO_DETECTION],
        "P02": ["White", "White"],
        "P03": ["White"],
        "P04": ["Blue", "Blue"],
        "P05": [NO_DETECTION, NO_DETECTION],
        "P06": ["Red", "White", "White"],
        "P07": ["Blue"],
        "P08": ["White", "White", "White"],
        "P09": [NO_DETECTION],
    }
    tallies, predictions = [], []
    for plate, labels in colour_layout.items():
        t, p = plate_results(plate, labels)
        tallies.append(t)
        predictions.extend(p)
    for plate, label in (("P00", "Toyota"), ("P02", "Toyota")):
        t, p = plate_results(plate, [label, label], task=Task.MAKE)
        tallies.append(t)
        predictions.extend(p)
    store.upsert_results(tallies, predictions)
    return colour_layout


class TestEventLog:
    def test_snapshot_equals_log_replay(self, tmp_path):
        store = AttributeStore(tmp_path)
        populate(store)
        store.submit_correction(
            "P05", Task.COLOUR, "Green", "officer-1", corrected_at=CORRECTION_STAMP
        )
        assert store.rebuild_snapshot_bytes() == store.snapshot_bytes()
        assert (tmp_path / "snapshot.json").read_bytes() == store.snapshot_bytes()

    def test_double_apply_is_idempotent(self, tmp_path):
        store = AttributeStore(tmp_path)
        tallies, predictions = [], []
        t, p = plate_results("P00", ["Red", "Red"])
        store.upsert_results([t], p)
        before_log = (tmp_path / "events.jsonl").read_bytes()
        before_snapshot = store.snapshot_bytes()
        store.upsert_results([t], p)
        assert (tmp_path / "events.jsonl").read_bytes() == before_log
        assert store.snapshot_bytes() == before_snapshot

    def test_reopen_reconstructs_state(self, tmp_path):
        store = AttributeStore(tmp_path)
        populate(store)
        reopened = AttributeStore(tmp_path)
        assert reopened.snapshot_bytes() == store.snapshot_bytes()
        assert reopened.plate_count == store.plate_count

    def test_tampered_log_detected(self, tmp_path):
        store = AttributeStore(tmp_path)
        populate(store)
        events_path = tmp_path / "events.jsonl"
        lines = events_path.read_text().splitlines()
        event = json.loads(lines[0])
        event["payload"]["tally"]["winner"] = "Purple"
        lines[0] = json.dumps(event)
        events_path.write_text("".join(line + "\n" for line in lines))
        with pytest.raises(StoreCorrupt):
            AttributeStore(tmp_path)

    def test_dangling_evidence_warns_but_is_accepted(self, tmp_path):
        store = AttributeStore(tmp_path)
        tally, predictions = plate_results("P00", ["Red", "Red"])
        findings = store.upsert_results([tally], predictions[:1])
        assert [f.code for f in findings] == ["dangling-evidence"]
        assert store.get_plate("P00")["tasks"]["colour"]["winner"] == "Red"

    def test_two_backends_both_retained(self, tmp_path):
        store = AttributeStore(tmp_path)
        t1, p1 = plate_results("P00", ["Red", "Red"], backend="mock:a")
        t2, p2 = plate_results("P00", ["Blue", "Blue"], backend="mock:b")
        store.upsert_results([t1, t2], p1 + p2)
        # default active backend: lexicographically first
        assert store.effective_label("P00", Task.COLOUR) == "Red"
        store.set_active_backend(Task.COLOUR, "mock:b")
        assert store.effective_label("P00", Task.COLOUR) == "Blue"


class TestCorrections:
    def test_correction_overrides_winner_in_matching(self, tmp_path):
        store = AttributeStore(tmp_path)
        populate(store)
        assert store.effective_label("P00", Task.COLOUR) == "Red"
        store.submit_correction(
            "P00", Task.COLOUR, "White", "officer-2", corrected_at=CORRECTION_STAMP
        )
        assert store.effective_label("P00", Task.COLOUR) == "White"
        total, items = store.search(Query(colour=frozenset({"White"})))
        assert "P00" in [item["plate_id"] for item in items]

    def test_history_retained_newest_wins(self, tmp_path):
        store = AttributeStore(tmp_path)
        populate(store)
        store.submit_correction("P00", Task.COLOUR, "White", "a", corrected_at=CORRECTION_STAMP)
        profile = store.submit_correction(
            "P00", Task.COLOUR, "Blue", "b", corrected_at=CORRECTION_STAMP
        )
        corrections = profile["tasks"]["colour"]["corrections"]
        assert [c["label"] for c in corrections] == ["White", "Blue"]
        assert store.effective_label("P00", Task.COLOUR) == "Blue"

    def test_unknown_label_rejected(self, tmp_path, colour_taxonomy):
        store = AttributeStore(tmp_path)
        populate(store)
        with pytest.raises(UnknownLabel):
            store.submit_correction(
                "P00", Task.COLOUR, "Chartreuse", "a", taxonomy=colour_taxonomy
            )

    def test_unknown_plate_not_found(self, tmp_path):
        store = AttributeStore(tmp_path)
        with pytest.raises(NotFound):
            store.submit_correction("ZZZ", Task.COLOUR, "Red", "a")


class TestGetPlate:
    def test_profile_contains_evidence_predictions(self, tmp_path):
        store = AttributeStore(tmp_path)
        populate(store)
        profile = store.get_plate("P00")
        colour = profile["tasks"]["colour"]
        assert colour["winner"] == "Red"
        assert colour["counts"] == {"Red": 3}
        assert len(colour["predictions"]) == 3
        assert {p["record_id"] for p in colour["predictions"]} == {
            "P00v0", "P00v1", "P00v2",
        }

    def test_missing_plate(self, tmp_path):
        store = AttributeStore(tmp_path)
        with pytest.raises(NotFound):
            store.get_plate("NOPE")


class TestSearch:
    def test_single_colour_filter(self, tmp_path):
        store = AttributeStore(tmp_path)
        populate(store)
        total, items = store.search(Query(colour=frozenset({"Red"})))
        # colour winners: P00 Red, P01 Red, P06 White (2-1), others not Red
        assert {item["plate_id"] for item in items} == {"P00", "P01"}
        assert total == 2

    def test_include_unknown_adds_no_detection_plates(self, tmp_path):
        store = AttributeStore(tmp_path)
        populate(store)
        total, items = store.search(Query(colour=frozenset({"Red"}), include_unknown=True))
        plates = {item["plate_id"] for item in items}
        # P05 and P09 have NO_DETECTION colour winners
        assert plates == {"P00", "P01", "P05", "P09"}

    def test_conjunction_semantics(self, tmp_path):
        store = AttributeStore(tmp_path)
        populate(store)
        total, items = store.search(
            Query(colour=frozenset({"Red", "White"}), make=frozenset({"Toyota"}))
        )
        # make winners exist only for P00 (Red) and P02 (White)
        assert {item["plate_id"] for item in items} == {"P00", "P02"}

    def test_no_detection_excluded_by_default(self, tmp_path):
        store = AttributeStore(tmp_path)
        populate(store)
        total, items = store.search(
            Query(colour=frozenset({"Red", "White", "Blue", "Green"}))
        )
        plates = {item["plate_id"] for item in items}
        assert "P05" not in plates and "P09" not in plates

    def test_ordering_most_recent_sighting_first(self, tmp_path):
        store = AttributeStore(tmp_path)
        populate(store)
        store.register_records(
            [
                make_record("P00v0", "P00", minutes=10, lat=-33.8, lon=151.2),
                make_record("P01v0", "P01", minutes=50, lat=-33.9, lon=151.1),
            ]
        )
        total, items = store.search(Query(colour=frozenset({"Red"})))
        assert [item["plate_id"] for item in items] == ["P01", "P00"]

    def test_time_window_filter(self, tmp_path):
        store = AttributeStore(tmp_path)
        populate(store)
        store.register_records(
            [
                make_record("P00v0", "P00", minutes=10),
                make_record("P01v0", "P01", minutes=500),
            ]
        )
        from datetime import timedelta

        from conftest import T0

        query = Query(
            colour=frozenset({"Red"}),
            captured_from=T0,
            captured_to=T0 + timedelta(minutes=60),
        )
        total, items = store.search(query)
        assert [item["plate_id"] for item in items] == ["P00"]

    def test_geo_box_filter(self, tmp_path):
        store = AttributeStore(tmp_path)
        populate(store)
        store.register_records(
            [
                make_record("P00v0", "P00", lat=-33.8, lon=151.2),
                make_record("P01v0", "P01", lat=-37.8, lon=144.9),
            ]
        )
        query = Query(
            colour=frozenset({"Red"}),
            lat_min=-34.0, lat_max=-33.0, lon_min=150.0, lon_max=152.0,
        )
        total, items = store.search(query)
        assert [item["plate_id"] for item in items] == ["P00"]

    def test_pagination_completeness(self, tmp_path):
        store = AttributeStore(tmp_path)
        populate(store)
        query_all = Query(colour=frozenset({"Red", "White", "Blue"}))
        total, everything = store.search(query_all)
        paged = []
        offset = 0
        while True:
            _, page = store.search(
                Query(colour=frozenset({"Red", "White", "Blue"}), offset=offset, limit=2)
            )
            if not page:
                break
            paged.extend(page)
            offset += 2
        assert [p["plate_id"] for p in paged] == [p["plate_id"] for p in everything]
        assert len({p["plate_id"] for p in paged}) == len(paged)
        assert total == len(everything)


class TestQueryValidation:
    def test_requires_at_least_one_filter(self):
        with pytest.raises(InvalidQuery):
            Query()

    def test_limit_capped(self):
        with pytest.raises(InvalidQuery):
            Query(colour=frozenset({"Red"}), limit=501)

    def test_partial_geo_box_rejected(self):
        with pytest.raises(InvalidQuery):
            Query(lat_min=0.0)

    def test_reversed_window_rejected(self):
        from datetime import timedelta

        from conftest import T0

        with pytest.raises(InvalidQuery):
            Query(captured_from=T0, captured_to=T0 - timedelta(minutes=1))


class TestSightings:
    def test_register_is_idempotent(self, tmp_path):
        store = AttributeStore(tmp_path)
        populate(store)
        records = [make_record("P00v0", "P00", minutes=5)]
        assert store.register_records(records) == 1
        assert store.register_records(records) == 0
        assert len(store.get_plate("P00")["sightings"]) == 1
