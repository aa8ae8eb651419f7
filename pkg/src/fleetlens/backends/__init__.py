"""Pluggable detector backends: mock tables, a seeded simulator, and a
remote model-server client, plus the batch orchestrator."""

from __future__ import annotations

from typing import Mapping

from ..domain import Task, Taxonomy
from .base import BackendDescriptor, DetectorBackend, Ranking
from .batch import BatchItem, run_batch
from .mock import MockBackend
from .remote import RemoteBackend
from .stochastic import StochasticBackend, StochasticProfile, record_rng

__all__ = [
    "BackendDescriptor",
    "BatchItem",
    "DetectorBackend",
    "MockBackend",
    "Ranking",
    "RemoteBackend",
    "StochasticBackend",
    "StochasticProfile",
    "create_backend",
    "record_rng",
    "run_batch",
]


def create_backend(
    spec: str,
    task: Task,
    mode: str = "detect",
    taxonomy: Taxonomy | None = None,
    truth: Mapping[str, str] | None = None,
    **remote_kwargs,
) -> DetectorBackend:
    """Build a backend from a spec string.

    Recognized forms: "mock:<fixtures.json>", "sim:p=0.8,q=0.05,seed=7",
    "remote:<base-url>". The simulator needs the task taxonomy and a
    ground-truth lookup.
    """
    kind, _, rest = spec.partition(":")
    if kind == "mock":
        if not rest:
            raise ValueError("mock backend needs a fixtures path: mock:<path>")
        return MockBackend.from_file(rest, task=task, mode=mode)
    if kind == "sim":
        if taxonomy is None or truth is None:
            raise ValueError("sim backend needs a taxonomy and ground truth")
        params = _parse_sim_params(rest)
        profile = StochasticProfile(
            p_correct=params.get("p", 1.0),
            p_no_detection=params.get("q", 0.0),
            seed=int(params.get("seed", 0)),
        )
        return StochasticBackend(
            backend_id=spec,
            task=task,
            labels=taxonomy.labels,
            truth=truth,
            profile=profile,
            mode=mode,
        )
    if kind == "remote":
        if not rest:
            raise ValueError("remote backend needs a base url: remote:<url>")
        return RemoteBackend(base_url=rest, task=task, mode=mode, **remote_kwargs)
    raise ValueError(f"unknown backend spec {spec!r}")


def _parse_sim_params(text: str) -> dict[str, float]:
    params: dict[str, float] = {}
    if not text:
        return params
    for pair in text.split(","):
        key, _, value = pair.partition("=")
        if not value:
            raise ValueError(f"bad sim parameter {pair!r}")
        params[key.strip()] = float(value)
    return params
