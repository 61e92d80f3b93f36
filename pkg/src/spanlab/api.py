"""HTTP service: datasets, rendering, campaign lifecycle, LLM jobs, exports.

Handlers hold no campaign state of their own; every mutation delegates to
the per-campaign engine, so restarting the process and replaying reads gives
identical bodies.  Handlers are plain sync functions (the framework runs
them on a worker pool) because the engine serializes with thread locks.
"""

from __future__ import annotations

import os
import secrets
import threading
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import FileResponse, HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from .campaigns import CampaignConfig, CampaignError
from .engine import CampaignManager
from .errors import SpanlabError
from .ingest import list_setups, node_to_json, render_example
from .llm import JOB_RUNNING, HttpChatClient, LlmJob
from .model import (
    HUMAN,
    AnnotationRecord,
    ExampleRef,
    SpanAnnotation,
    format_timestamp,
    parse_timestamp,
    utc_now,
)

DEFAULT_ADMIN_TOKEN_ENV = "SPANLAB_ADMIN_TOKEN"

# 4xx = the HTTP caller can fix the request; 5xx = broken data or IO on our side
_STATUS_BY_CODE = {
    "BAD_REQUEST": 400,
    "BAD_FORMAT": 400,
    "UNAUTHORIZED": 401,
    "NOT_FOUND": 404,
    "UNKNOWN_CAMPAIGN": 404,
    "MISSING_META": 404,
    "MISSING_FILE": 404,
    "INDEX_OUT_OF_RANGE": 404,
    "NOT_ASSIGNED_TO_YOU": 409,
    "ALREADY_COMPLETED_CONFLICT": 409,
    "CONFLICT": 409,
    "WRONG_CAMPAIGN_KIND": 409,
    "CAMPAIGN_EXISTS": 409,
    "VALIDATION_FAILED": 422,
    "INCOMPLETE_BATCH": 422,
    "EMPTY_EXAMPLES": 422,
    "DUPLICATE_EXAMPLE": 422,
    "API_ERROR": 502,
    "UNPARSEABLE": 502,
    "WRONG_SHAPE": 502,
}

_PLACEHOLDER_PAGE = """<!doctype html>
<html><head><meta charset="utf-8"><title>span annotation service</title></head>
<body style="font-family: sans-serif; max-width: 40rem; margin: 3rem auto;">
<h1>span annotation service</h1>
<p>The service is running, but no web UI build is configured.
Point <code>serve --static-dir</code> at a built UI, or use the HTTP API:</p>
<ul>
<li><code>GET /api/datasets</code></li>
<li><code>GET /api/campaigns</code>, <code>GET /api/campaigns/{id}/progress</code></li>
<li><code>POST /api/campaigns/{id}/next?annotator=ID</code></li>
<li><code>GET /api/campaigns/{id}/export?format=jsonl|csv</code></li>
</ul>
</body></html>
"""


class JobRegistry:
    """At most one live LLM job per campaign, per process."""

    def __init__(self):
        self._jobs: dict[str, LlmJob] = {}
        self._lock = threading.Lock()

    def start(self, campaign_id: str, factory) -> LlmJob:
        with self._lock:
            existing = self._jobs.get(campaign_id)
            if existing is not None and existing.status().state == JOB_RUNNING:
                raise SpanlabError("CONFLICT", f"an annotation job for {campaign_id!r} is already running")
            job = factory()
            self._jobs[campaign_id] = job
        job.start()
        return job

    def get(self, campaign_id: str) -> LlmJob | None:
        with self._lock:
            return self._jobs.get(campaign_id)

    def stop_all(self) -> None:
        with self._lock:
            jobs = list(self._jobs.values())
        for job in jobs:
            job.stop()


def create_app(
    data_dir: Path | str,
    admin_token_env: str = DEFAULT_ADMIN_TOKEN_ENV,
    static_dir: Path | str | None = None,
) -> FastAPI:
    manager = CampaignManager(data_dir)
    jobs = JobRegistry()
    static_root = Path(static_dir) if static_dir else None

    app = FastAPI(title="span annotation service", docs_url=None, redoc_url=None, openapi_url=None)
    app.state.manager = manager
    app.state.jobs = jobs

    @app.exception_handler(SpanlabError)
    async def _spanlab_error(request: Request, exc: SpanlabError):
        body = {"code": exc.code, "message": exc.message}
        if "violations" in exc.context:
            body["violations"] = exc.context["violations"]
        if "missing" in exc.context:
            body["missing"] = exc.context["missing"]
        return JSONResponse(body, status_code=_STATUS_BY_CODE.get(exc.code, 500))

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request: Request, exc: RequestValidationError):
        return JSONResponse({"code": "BAD_REQUEST", "message": str(exc.errors()[:3])}, status_code=400)

    def require_admin(request: Request) -> None:
        expected = os.environ.get(admin_token_env, "")
        supplied = request.headers.get("authorization", "")
        token = supplied.removeprefix("Bearer ").strip() if supplied.startswith("Bearer ") else ""
        if not expected or not token or not secrets.compare_digest(token, expected):
            raise SpanlabError(
                "UNAUTHORIZED",
                f"admin routes need 'Authorization: Bearer <token>' matching ${admin_token_env}",
            )

    def example_payload(ref: ExampleRef) -> dict:
        tree = render_example(manager.example_value(ref.dataset_id, ref.split, ref.example_idx))
        return {
            "example_ref": ref.to_json(),
            "render_tree": {"root": node_to_json(tree.root)},
            "output_text": manager.output_text(ref),
        }

    # -- datasets ------------------------------------------------------------

    @app.get("/api/datasets")
    def api_datasets():
        payload = []
        for record in manager.list_datasets():
            item = record.to_json()
            item["setups"] = {
                split: list_setups(manager.data_root, record.dataset_id, split)
                for split in record.splits
            }
            payload.append(item)
        return payload

    @app.get("/api/datasets/{dataset_id}/splits/{split}/examples/{example_idx}")
    def api_example(dataset_id: str, split: str, example_idx: int, setup: str | None = None):
        tree = render_example(manager.example_value(dataset_id, split, example_idx))
        output_text = None
        if setup is not None:
            output_text = manager.output_text(ExampleRef(dataset_id, split, setup, example_idx))
        return {"render_tree": {"root": node_to_json(tree.root)}, "output_text": output_text}

    # -- campaign lifecycle ----------------------------------------------------

    @app.post("/api/campaigns", status_code=201)
    def api_create_campaign(payload: dict, request: Request):
        require_admin(request)
        try:
            config = CampaignConfig.from_json(payload)
        except (KeyError, TypeError, ValueError) as exc:
            raise SpanlabError("BAD_REQUEST", f"bad campaign config: {exc}") from exc
        engine = manager.create(config)
        return {
            "campaign_id": engine.campaign_id,
            "kind": engine.config.kind,
            "batch_count": len(engine.state.batches),
        }

    @app.get("/api/campaigns")
    def api_list_campaigns():
        payload = []
        for engine in manager.list_campaigns():
            payload.append({
                "campaign_id": engine.campaign_id,
                "kind": engine.config.kind,
                "created_at": format_timestamp(engine.state.created_at),
                "batch_count": len(engine.state.batches),
            })
        return payload

    @app.get("/api/campaigns/{campaign_id}")
    def api_campaign_detail(campaign_id: str):
        engine = manager.get(campaign_id)
        config = engine.config
        return {
            "campaign_id": config.campaign_id,
            "kind": config.kind,
            "created_at": format_timestamp(engine.state.created_at),
            "sources": [s.to_json() for s in config.sources],
            "categories": [c.to_json() for c in config.categories],
            "instructions": config.instructions,
            "batch_count": len(engine.state.batches),
        }

    @app.get("/api/campaigns/{campaign_id}/progress")
    def api_progress(campaign_id: str):
        return manager.get(campaign_id).progress()

    @app.get("/api/campaigns/{campaign_id}/batches")
    def api_batches(campaign_id: str):
        return manager.get(campaign_id).batches_snapshot()

    @app.get("/api/campaigns/{campaign_id}/records")
    def api_records(campaign_id: str):
        engine = manager.get(campaign_id)
        completed = [b["batch_idx"] for b in engine.batches_snapshot() if b["status"] == "completed"]
        records = []
        for batch_idx in completed:
            for record in manager.store.load_batch_records(campaign_id, batch_idx) or []:
                item = record.to_json()
                item["output_text"] = manager.output_text(record.example)
                records.append(item)
        return records

    # -- annotator flow --------------------------------------------------------

    @app.post("/api/campaigns/{campaign_id}/next")
    def api_next(campaign_id: str, annotator: str = ""):
        if not annotator:
            raise SpanlabError("BAD_REQUEST", "query parameter 'annotator' is required")
        engine = manager.get(campaign_id)
        assignment = engine.next_batch(annotator)
        if assignment is None:
            return Response(status_code=204)
        batch_idx, refs = assignment
        return {
            "batch_idx": batch_idx,
            "examples": [example_payload(ref) for ref in refs],
            "categories": [c.to_json() for c in engine.config.categories],
            "instructions": engine.config.instructions,
        }

    @app.post("/api/campaigns/{campaign_id}/save")
    def api_save(campaign_id: str, payload: dict):
        try:
            annotator = payload["annotator"]
            batch_idx = payload["batch_idx"]
            raw_records = payload["records"]
            if not isinstance(annotator, str) or not annotator:
                raise ValueError("annotator must be a non-empty string")
            if not isinstance(batch_idx, int) or isinstance(batch_idx, bool):
                raise ValueError("batch_idx must be an integer")
            if not isinstance(raw_records, list):
                raise ValueError("records must be a list")
            now = utc_now()
            records = []
            for item in raw_records:
                started = parse_timestamp(item["started_at"]) if "started_at" in item else now
                finished = parse_timestamp(item["finished_at"]) if "finished_at" in item else now
                records.append(AnnotationRecord(
                    campaign_id=campaign_id,
                    example=ExampleRef.from_json(item["example"]),
                    annotator_id=annotator,
                    annotator_kind=HUMAN,
                    spans=tuple(SpanAnnotation.from_json(s) for s in item.get("spans", [])),
                    flags=tuple(item.get("flags", ())),
                    started_at=started,
                    finished_at=finished,
                    extra=item.get("extra"),
                ))
        except (KeyError, TypeError, ValueError) as exc:
            raise SpanlabError("BAD_REQUEST", f"bad save payload: {exc}") from exc
        code = manager.get(campaign_id).submit_batch(annotator, batch_idx, records)
        return {"completion_code": code}

    # -- LLM job control ---------------------------------------------------------

    @app.post("/api/campaigns/{campaign_id}/llm/start", status_code=202)
    def api_llm_start(campaign_id: str, request: Request):
        require_admin(request)
        engine = manager.get(campaign_id)
        if engine.config.llm is None:
            raise CampaignError("WRONG_CAMPAIGN_KIND", f"campaign {campaign_id!r} is not an llm campaign")

        def factory() -> LlmJob:
            client = HttpChatClient(engine.config.llm)
            return LlmJob(engine, client, manager.render_text, manager.output_text)

        job = jobs.start(campaign_id, factory)
        return job.status().to_json()

    @app.post("/api/campaigns/{campaign_id}/llm/stop")
    def api_llm_stop(campaign_id: str, request: Request):
        require_admin(request)
        manager.get(campaign_id)
        job = jobs.get(campaign_id)
        if job is None:
            return {"state": "idle", "completed_count": 0, "error_count": 0}
        job.stop()
        return job.status().to_json()

    @app.get("/api/campaigns/{campaign_id}/llm/status")
    def api_llm_status(campaign_id: str):
        manager.get(campaign_id)
        job = jobs.get(campaign_id)
        if job is None:
            return {"state": "idle", "completed_count": 0, "error_count": 0}
        return job.status().to_json()

    # -- export ------------------------------------------------------------------

    @app.get("/api/campaigns/{campaign_id}/export")
    def api_export(campaign_id: str, format: str = "jsonl"):
        blob = manager.store.export(campaign_id, format)
        media = "text/csv; charset=utf-8" if format == "csv" else "application/x-ndjson; charset=utf-8"
        return Response(
            content=blob,
            media_type=media,
            headers={"content-disposition": f'attachment; filename="{campaign_id}.{format}"'},
        )

    # -- UI pages ------------------------------------------------------------------

    def ui_page() -> Response:
        if static_root is not None:
            index = static_root / "index.html"
            if index.is_file():
                return FileResponse(index)
        return HTMLResponse(_PLACEHOLDER_PAGE)

    @app.get("/")
    def page_root():
        return ui_page()

    @app.get("/annotate/{campaign_id}")
    def page_annotate(campaign_id: str):
        return ui_page()

    @app.get("/monitor/{campaign_id}")
    def page_monitor(campaign_id: str):
        return ui_page()

    if static_root is not None and (static_root / "assets").is_dir():
        app.mount("/assets", StaticFiles(directory=static_root / "assets"), name="assets")

    return app
