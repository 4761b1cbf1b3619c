"""HTTP front door binding ingestion, the pipeline, the store, and the
evaluation reports into one deployable process.

Request handling is concurrent; all shared state is the pipeline's
(immutable models, a locked store appender, the retry queue).  Batch
POSTs use per-item statuses: one bad post never blocks the rest.
"""

import json
from contextlib import asynccontextmanager
from typing import Optional

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse

from .backends import probe_health
from .config import ServiceConfig
from .errors import EstatewatchError, ValidationError
from .evaluation import (
    EvaluationTask,
    evaluate_labels,
    geolocation_error,
    geolocation_report,
    load_geo_gold_file,
    load_label_file,
    report_to_obj,
)
from .geolocation import GeolocationResult
from .ingestion import PseudonymKey, normalize_record, load_key
from .pipeline import Pipeline
from .persistence import QueryFilter
from .types import (
    ClassifiedEvent,
    EstateLabel,
    event_to_obj,
    location_to_obj,
    parse_timestamp,
    topic_from_name,
    topic_name,
)

DEFAULT_PAGE_SIZE = 100


def create_app(
    config: ServiceConfig,
    pipeline: Optional[Pipeline] = None,
    key: Optional[PseudonymKey] = None,
) -> FastAPI:
    """Build the service; callers own the pipeline's lifetime if they pass one."""
    owns_pipeline = pipeline is None
    runtime = pipeline or Pipeline(config.pipeline)

    @asynccontextmanager
    async def lifespan(_app):
        yield
        if owns_pipeline:
            runtime.close()

    app = FastAPI(title="estatewatch", docs_url=None, redoc_url=None, lifespan=lifespan)
    app.state.config = config
    app.state.pipeline = runtime
    app.state.key = key or load_key(config.pseudonym_key_source)
    app.state.gold = _load_gold(config)

    @app.post("/v1/posts")
    async def post_posts(request: Request):
        body = await request.body()
        if len(body) > config.request_body_limit:
            return JSONResponse({"error": "request body too large"}, status_code=413)
        try:
            payload = json.loads(body)
        except ValueError:
            return JSONResponse({"error": "malformed JSON body"}, status_code=400)
        records = payload if isinstance(payload, list) else [payload]
        outcomes = [_handle_record(app, record) for record in records]
        return JSONResponse(outcomes, status_code=200)

    @app.get("/v1/events")
    def get_events(
        topic: Optional[str] = None,
        time_from: Optional[str] = Query(default=None, alias="from"),
        time_to: Optional[str] = Query(default=None, alias="to"),
        neighbourhood: Optional[str] = None,
        estate_only: bool = False,
        cursor: int = -1,
        page_size: int = DEFAULT_PAGE_SIZE,
    ):
        try:
            flt = QueryFilter(
                topic=None if topic is None else topic_from_name(topic),
                time_from=None if time_from is None else parse_timestamp(time_from),
                time_to=None if time_to is None else parse_timestamp(time_to),
                neighbourhood=neighbourhood,
                estate_only=estate_only,
            )
        except ValidationError as exc:
            return JSONResponse({"error": str(exc)}, status_code=400)
        page_size = max(1, min(page_size, 1000))
        events = app.state.pipeline.store.query(flt, after_seq=cursor, limit=page_size)
        next_cursor = events[-1].pipeline_seq if len(events) == page_size else None
        return JSONResponse(
            {
                "events": [event_to_obj(e) for e in events],
                "next_cursor": next_cursor,
            }
        )

    @app.get("/v1/metrics")
    def get_metrics(task: str = ""):
        try:
            task_enum = EvaluationTask(task)
        except ValueError:
            valid = ", ".join(t.value for t in EvaluationTask)
            return JSONResponse(
                {"error": f"unknown task {task!r}; valid: {valid}"}, status_code=400
            )
        report = _metrics_for(app, task_enum)
        if report is None:
            return JSONResponse(
                {"error": f"no gold data loaded for task {task_enum.value}"},
                status_code=404,
            )
        return JSONResponse(report_to_obj(report))

    @app.get("/v1/health")
    def get_health():
        pipeline: Pipeline = app.state.pipeline
        return JSONResponse(
            {
                "high_water_seq": pipeline.store.high_water,
                "backends": {
                    "estate": probe_health(config.pipeline.estate_backend),
                    "topic": probe_health(config.pipeline.topic_backend),
                },
                "parked_queue_depth": len(pipeline.retry_queue),
                "parked_dropped": pipeline.retry_queue.dropped,
            }
        )

    return app


def _handle_record(app: FastAPI, record) -> dict:
    post_id = record.get("id") if isinstance(record, dict) else None
    try:
        post = normalize_record(record, app.state.key)
    except (ValidationError, ValueError, TypeError) as exc:
        return {
            "post_id": post_id,
            "status": "rejected",
            "reason": str(exc),
        }
    try:
        event = app.state.pipeline.process_post(post)
    except EstatewatchError as exc:
        return {"post_id": post.post_id, "status": "rejected", "reason": str(exc)}
    if event is None:
        return {"post_id": post.post_id, "status": "parked"}
    return _outcome(event)


def _outcome(event: ClassifiedEvent) -> dict:
    return {
        "post_id": event.post.post_id,
        "status": "ok",
        "estate_label": event.estate_label.value,
        "estate_score": event.estate_score,
        "topic": None if event.topic_label is None else topic_name(event.topic_label),
        "location": None if event.location is None else location_to_obj(event.location),
        "pipeline_seq": event.pipeline_seq,
        "fallback": event.fallback,
    }


def _load_gold(config: ServiceConfig) -> dict:
    gold: dict = {}
    if config.gold.estate:
        gold["estate"] = load_label_file(
            config.gold.estate, EvaluationTask.ESTATE_DETECTION
        )
    if config.gold.topic:
        gold["topic"] = load_label_file(
            config.gold.topic, EvaluationTask.TOPIC_CLASSIFICATION
        )
    if config.gold.location:
        gold["geo"] = load_geo_gold_file(config.gold.location)
    return gold


def _metrics_for(app: FastAPI, task: EvaluationTask):
    gold = app.state.gold.get(task.value)
    if gold is None:
        return None
    store = app.state.pipeline.store
    if task is EvaluationTask.ESTATE_DETECTION:
        pred = {
            e.post.post_id: e.estate_label.value
            for e in store.events()
            if e.post.post_id in gold
        }
        return evaluate_labels(gold, pred, task)
    if task is EvaluationTask.TOPIC_CLASSIFICATION:
        pred = {
            e.post.post_id: e.topic_label.value
            for e in store.events()
            if e.topic_label is not None and e.post.post_id in gold
        }
        return evaluate_labels(gold, pred, task)
    results = {
        e.post.post_id: GeolocationResult(e.location, 0)
        for e in store.events()
        if e.post.post_id in gold and e.estate_label is EstateLabel.ESTATE
    }
    return geolocation_report(geolocation_error(gold, results))
