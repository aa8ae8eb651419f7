"""Shared fixtures: taxonomies and record builders."""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

import pytest

from fleetlens.domain import ImageRecord, Task, Taxonomy

COLOURS = ("White", "Black", "Silver", "Grey", "Red", "Blue", "Green", "Brown", "Beige")
COLOUR_MERGES = {"Maroon": "Red", "Gold": "Beige"}
BRIGHT_DARK = {
    "White": "bright",
    "Silver": "bright",
    "Beige": "bright",
    "Red": "bright",
    "Black": "dark",
    "Grey": "dark",
    "Blue": "dark",
    "Green": "dark",
    "Brown": "dark",
}

MAKES = ("BMW", "Ford", "Holden", "Mazda", "Mercedes", "Toyota")
SHAPES = ("sedan", "suv", "hatchback", "van", "truck", "ute")

T0 = datetime(2025, 4, 1, 12, 0, 0, tzinfo=timezone.utc)


@pytest.fixture
def colour_taxonomy() -> Taxonomy:
    return Taxonomy(task=Task.COLOUR, labels=COLOURS, merge_map=COLOUR_MERGES)


@pytest.fixture
def colour_binary_taxonomy() -> Taxonomy:
    return Taxonomy(
        task=Task.COLOUR_BINARY,
        labels=("bright", "dark"),
        binary_map=BRIGHT_DARK,
    )


@pytest.fixture
def make_taxonomy() -> Taxonomy:
    return Taxonomy(task=Task.MAKE, labels=MAKES, merge_map={"Merc": "Mercedes"})


@pytest.fixture
def shape_taxonomy() -> Taxonomy:
    return Taxonomy(task=Task.SHAPE, labels=SHAPES)


def make_record(
    record_id: str,
    plate_id: str = "ABC-123",
    minutes: int = 0,
    ground_truth: dict[Task, str] | None = None,
    image_ref: str = "img.jpg",
    lat: float | None = None,
    lon: float | None = None,
    label_ref: str | None = None,
) -> ImageRecord:
    return ImageRecord(
        record_id=record_id,
        plate_id=plate_id,
        image_ref=image_ref,
        captured_at=T0 + timedelta(minutes=minutes),
        lat=lat,
        lon=lon,
        label_ref=label_ref,
        ground_truth=ground_truth or {},
    )
