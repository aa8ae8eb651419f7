"""HTTP query service: attribute search, plate detail, corrections.

JSON API:
  GET  /v1/search        conjunctive attribute/time/geo search, paginated
  GET  /v1/plates/{id}   full profile with per-record evidence
  POST /v1/corrections   append a human correction (422 on unknown label)
  GET  /v1/health        liveness and plate count
  GET  /v1/taxonomies    label sets for console filter panels
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException, Query as QueryParam
from pydantic import BaseModel

from .domain import Task, Taxonomy, parse_rfc3339
from .errors import InvalidQuery, NotFound, UnknownLabel
from .querystore import AttributeStore, Query


class CorrectionRequest(BaseModel):
    plate_id: str
    task: str
    label: str
    author: str


def _label_set(raw: str | None) -> frozenset[str] | None:
    if not raw:
        return None
    labels = frozenset(part.strip() for part in raw.split(",") if part.strip())
    return labels or None


def _timestamp(raw: str | None, name: str) -> object:
    if not raw:
        return None
    try:
        return parse_rfc3339(raw)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=f"bad {name}: {exc}") from None


def create_app(store: AttributeStore, taxonomies: dict[Task, Taxonomy] | None = None) -> FastAPI:
    app = FastAPI(title="fleetlens query service")
    taxonomies = taxonomies or {}

    @app.get("/v1/health")
    def health() -> dict:
        return {"status": "ok", "plates": store.plate_count}

    @app.get("/v1/taxonomies")
    def get_taxonomies() -> dict:
        return {task.value: tax.to_dict() for task, tax in sorted(taxonomies.items())}

    @app.get("/v1/search")
    def search(
        make: str | None = None,
        shape: str | None = None,
        colour: str | None = None,
        colour_binary: str | None = None,
        from_: str | None = QueryParam(default=None, alias="from"),
        to: str | None = None,
        lat_min: float | None = None,
        lat_max: float | None = None,
        lon_min: float | None = None,
        lon_max: float | None = None,
        include_unknown: bool = False,
        offset: int = 0,
        limit: int = 100,
    ) -> dict:
        try:
            query = Query(
                make=_label_set(make),
                shape=_label_set(shape),
                colour=_label_set(colour),
                colour_binary=_label_set(colour_binary),
                captured_from=_timestamp(from_, "from"),
                captured_to=_timestamp(to, "to"),
                lat_min=lat_min,
                lat_max=lat_max,
                lon_min=lon_min,
                lon_max=lon_max,
                include_unknown=include_unknown,
                offset=offset,
                limit=limit,
            )
        except InvalidQuery as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        total, items = store.search(query)
        return {"total": total, "items": items}

    @app.get("/v1/plates/{plate_id}")
    def get_plate(plate_id: str) -> dict:
        try:
            profile = store.get_plate(plate_id)
        except NotFound as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None
        tasks = profile["tasks"]
        evidence = []
        for task_name in sorted(tasks):
            evidence.extend(tasks[task_name].pop("predictions", []))
        profile["evidence"] = evidence
        return profile

    @app.post("/v1/corrections")
    def submit_correction(request: CorrectionRequest) -> dict:
        try:
            task = Task(request.task)
        except ValueError:
            raise HTTPException(status_code=422, detail=f"unknown task {request.task!r}") from None
        try:
            return store.submit_correction(
                plate_id=request.plate_id,
                task=task,
                label=request.label,
                author=request.author,
                taxonomy=taxonomies.get(task),
            )
        except UnknownLabel as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        except NotFound as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None

    return app
