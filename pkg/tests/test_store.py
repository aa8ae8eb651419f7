"""Pipeline workspace round-trips."""

from __future__ import annotations

from fleetlens.curation import make_split
from fleetlens.domain import Task
from fleetlens.store import PipelineStore, record_from_row, record_to_row

from conftest import make_record


class TestRecords:
    def test_round_trip(self, tmp_path):
        store = PipelineStore(tmp_path)
        records = [
            make_record("r2", "AAA-1", ground_truth={Task.COLOUR: "Red"}),
            make_record("r1", "BBB-2", lat=-33.8, lon=151.2),
        ]
        store.add_records(records)
        loaded = store.load_records()
        assert [r.record_id for r in loaded] == ["r1", "r2"]
        assert loaded[1].ground_truth == {Task.COLOUR: "Red"}
        assert loaded[0].lat == -33.8

    def test_double_ingest_identical_record_set(self, tmp_path):
        store = PipelineStore(tmp_path)
        records = [make_record("r1", "AAA-1"), make_record("r2", "AAA-1")]
        store.add_records(records)
        first = (tmp_path / "records.jsonl").read_bytes()
        store.add_records(records)
        assert (tmp_path / "records.jsonl").read_bytes() == first

    def test_reingest_preserves_attached_truth(self, tmp_path):
        store = PipelineStore(tmp_path)
        store.add_records([make_record("r1", "AAA-1")])
        store.attach_truth({"r1": {Task.MAKE: "Toyota"}})
        store.add_records([make_record("r1", "AAA-1")])
        assert store.load_records()[0].ground_truth == {Task.MAKE: "Toyota"}

    def test_row_codec_round_trip(self):
        record = make_record(
            "r1", "AAA-1", ground_truth={Task.MAKE: "Toyota"}, lat=1.0, lon=2.0,
            label_ref="r1.txt",
        )
        assert record_from_row(record_to_row(record)) == record


class TestSplitAndTaxonomies:
    def test_split_round_trip(self, tmp_path):
        store = PipelineStore(tmp_path)
        split = make_split([f"P{i}" for i in range(20)], seed=4)
        store.save_split(split)
        assert store.load_split() == split

    def test_taxonomy_round_trip(self, tmp_path, colour_taxonomy, make_taxonomy):
        store = PipelineStore(tmp_path)
        store.save_taxonomy(colour_taxonomy)
        store.save_taxonomy(make_taxonomy)
        assert store.load_taxonomy(Task.COLOUR) == colour_taxonomy
        loaded = store.load_taxonomies()
        assert set(loaded) == {Task.COLOUR, Task.MAKE}
