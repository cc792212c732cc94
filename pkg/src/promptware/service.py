"""HTTP service: packs out, previews and completions in.

Endpoints (JSON):

  GET  /api/health     liveness plus pack/provider status; never calls out
  GET  /api/templates  every template with full slot detail for UI rendering
  GET  /api/statics    id and label of every one-click static prompt
  POST /api/preview    resolve a request to prompt text, no provider contact
  POST /api/feedback   resolve, send to the provider, return the finished job
  POST /api/reload     atomically re-read the pack directory

The registry is a snapshot behind an atomic swap, so readers see either the
old packs or the new ones, never a mix. Every 4xx/5xx body carries a
machine-readable ``error`` code. Requests and outcomes are appended to a
JSON-lines history log; prompt and sample text stay out of it unless
LOG_BODIES=true.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

from .gateway import (
    E_TIMEOUT,
    PROVIDER_MOCK,
    PROVIDER_OPENAI_COMPATIBLE,
    CompletionResult,
    GatewayError,
    ProviderConfig,
    Transport,
    complete,
)
from .middleware import (
    E_UNKNOWN_STATIC,
    E_UNKNOWN_TEMPLATE,
    Mode,
    PromptRegistry,
    PromptRequest,
    ResolveError,
    resolve,
)
from .packs import PackError, default_pack_dir, load_pack_dir, slot_spec_to_obj
from .templates import (
    ResolvedPrompt,
    Selection,
    ValidationReport,
    effective_slots,
)

logger = logging.getLogger(__name__)

E_BAD_REQUEST = "E_BAD_REQUEST"
E_EMPTY_PROMPT = "E_EMPTY_PROMPT"
E_NO_REGISTRY = "E_NO_REGISTRY"

STATE_PENDING = "pending"
STATE_DONE = "done"
STATE_FAILED = "failed"

DEFAULT_GATEWAY_CONCURRENCY = 32


@dataclass(frozen=True)
class ServiceSettings:
    pack_dir: Path
    provider: ProviderConfig
    ui_origin: str | None = None
    history_path: Path | None = None
    log_bodies: bool = False
    gateway_concurrency: int = DEFAULT_GATEWAY_CONCURRENCY
    ui_dir: Path | None = None


def provider_config_from_env(env: Mapping[str, str] | None = None) -> ProviderConfig:
    env = os.environ if env is None else env
    kind = env.get("PROVIDER_KIND", PROVIDER_MOCK)
    config = ProviderConfig(
        kind=kind,
        model=env.get("PROVIDER_MODEL", "mock-model"),
        base_url=env.get("PROVIDER_BASE_URL", ""),
        api_key_ref=env.get("PROVIDER_API_KEY_REF", "PROVIDER_API_KEY"),
        timeout=float(env.get("PROVIDER_TIMEOUT", "30")),
        max_attempts=int(env.get("PROVIDER_MAX_ATTEMPTS", "3")),
        max_output_tokens=int(env.get("PROVIDER_MAX_OUTPUT_TOKENS", "512")),
        temperature=float(env.get("PROVIDER_TEMPERATURE", "0.7")),
    )
    return config


def settings_from_env(env: Mapping[str, str] | None = None) -> ServiceSettings:
    env = os.environ if env is None else env
    history = env.get("HISTORY_LOG", "history.jsonl")
    ui_dir = env.get("UI_DIR", "")
    return ServiceSettings(
        pack_dir=Path(env.get("PACK_DIR", str(default_pack_dir()))),
        provider=provider_config_from_env(env),
        ui_origin=env.get("UI_ORIGIN") or None,
        history_path=Path(history) if history else None,
        log_bodies=env.get("LOG_BODIES", "").lower() == "true",
        gateway_concurrency=int(
            env.get("GATEWAY_CONCURRENCY", str(DEFAULT_GATEWAY_CONCURRENCY))
        ),
        ui_dir=Path(ui_dir) if ui_dir else None,
    )


@dataclass(frozen=True)
class RegistrySnapshot:
    registry: PromptRegistry
    loaded_at: float
    pack_version: int


class RegistryHolder:
    """Publishes immutable registry snapshots; reload swaps the whole thing."""

    def __init__(self, pack_dir: Path):
        self._pack_dir = pack_dir
        self._lock = threading.Lock()
        self._snapshot: RegistrySnapshot | None = None

    def snapshot(self) -> RegistrySnapshot | None:
        return self._snapshot

    def load_initial(self) -> None:
        try:
            self.reload()
        except (PackError, NotADirectoryError) as exc:
            logger.warning("pack load failed, serving degraded: %s", exc)

    def reload(self) -> RegistrySnapshot:
        """Re-read the pack directory; on failure the old snapshot stays."""
        with self._lock:
            registry, version = load_pack_dir(self._pack_dir)
            snapshot = RegistrySnapshot(
                registry=registry, loaded_at=time.time(), pack_version=version
            )
            self._snapshot = snapshot
            return snapshot


@dataclass(frozen=True)
class FeedbackJob:
    """One request through the full pipeline and its outcome."""

    job_id: str
    request: PromptRequest
    resolved: ResolvedPrompt
    result: CompletionResult | GatewayError | None
    state: str

    def __post_init__(self) -> None:
        if (self.state == STATE_DONE) != isinstance(self.result, CompletionResult):
            raise ValueError("state is 'done' exactly when a completion result is present")


class HistoryLog:
    """Append-only JSON-lines request history; writes are serialized."""

    def __init__(self, path: Path | None, log_bodies: bool):
        self._path = path
        self._log_bodies = log_bodies
        self._lock = threading.Lock()

    def append(self, job: FeedbackJob) -> None:
        if self._path is None:
            return
        entry: dict[str, Any] = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "job_id": job.job_id,
            "mode": job.request.mode.value,
            "provenance": _provenance_obj(job.resolved),
            "state": job.state,
        }
        if self._log_bodies:
            entry["prompt_text"] = job.resolved.text
            if isinstance(job.result, CompletionResult):
                entry["result_text"] = job.result.text
        line = json.dumps(entry, ensure_ascii=False)
        with self._lock:
            with open(self._path, "a", encoding="utf-8") as handle:
                handle.write(line + "\n")


def _provenance_obj(resolved: ResolvedPrompt) -> dict:
    return {
        "mode": resolved.provenance.mode,
        "source_id": resolved.provenance.source_id,
        "version": resolved.provenance.version,
    }


def _resolved_obj(resolved: ResolvedPrompt) -> dict:
    return {"text": resolved.text, "provenance": _provenance_obj(resolved)}


def _report_obj(report: ValidationReport) -> list[dict]:
    items = []
    for item in report.items:
        obj = {"code": item.code, "slot": item.slot, "message": item.message}
        if item.value is not None:
            obj["value"] = item.value
        items.append(obj)
    return items


def _result_obj(result: CompletionResult) -> dict:
    return {
        "text": result.text,
        "attempts": result.attempts,
        "latency": result.latency,
        "provider": {"kind": result.provider.kind, "model": result.provider.model},
    }


def _job_obj(job: FeedbackJob) -> dict:
    obj: dict[str, Any] = {
        "job_id": job.job_id,
        "state": job.state,
        "mode": job.request.mode.value,
        "resolved": _resolved_obj(job.resolved),
        "result": _result_obj(job.result) if isinstance(job.result, CompletionResult) else None,
    }
    if isinstance(job.result, GatewayError):
        obj["error"] = {"code": job.result.kind, "message": job.result.message}
    return obj


class BadRequest(Exception):
    def __init__(self, message: str, code: str = E_BAD_REQUEST):
        super().__init__(message)
        self.code = code
        self.message = message


def _parse_prompt_request(body: Any) -> PromptRequest:
    if not isinstance(body, dict):
        raise BadRequest("request body must be a JSON object")
    mode_raw = body.get("mode")
    try:
        mode = Mode(mode_raw)
    except ValueError:
        raise BadRequest(f"mode must be one of 'static', 'template', 'freeform', got {mode_raw!r}")
    try:
        if mode is Mode.STATIC:
            static_id = body.get("static_id")
            if not isinstance(static_id, str):
                raise BadRequest("static requests need a string 'static_id'")
            return PromptRequest.static(static_id)
        if mode is Mode.TEMPLATE:
            template_id = body.get("template_id")
            if not isinstance(template_id, str):
                raise BadRequest("template requests need a string 'template_id'")
            selection_raw = body.get("selection")
            if not isinstance(selection_raw, dict):
                raise BadRequest("template requests need a 'selection' object")
            return PromptRequest.template(template_id, Selection(selection_raw))
        freeform_text = body.get("freeform_text")
        if not isinstance(freeform_text, str):
            raise BadRequest("freeform requests need a string 'freeform_text'")
        return PromptRequest.freeform(freeform_text)
    except ValueError as exc:
        raise BadRequest(str(exc)) from exc


def _error_response(status: int, code: str, message: str, **extra: Any) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": code, "message": message, **extra})


def create_app(
    settings: ServiceSettings | None = None, *, transport: Transport | None = None
) -> FastAPI:
    """Build the service; packs load eagerly so tests need no startup hooks."""
    if settings is None:
        settings = settings_from_env()

    app = FastAPI(title="promptware", docs_url=None, redoc_url=None)
    holder = RegistryHolder(settings.pack_dir)
    holder.load_initial()
    history = HistoryLog(settings.history_path, settings.log_bodies)
    gateway_slots = threading.BoundedSemaphore(settings.gateway_concurrency)

    app.state.settings = settings
    app.state.registry_holder = holder

    if settings.ui_origin:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=[settings.ui_origin],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(RequestValidationError)
    def _validation_handler(_request: Request, exc: RequestValidationError) -> JSONResponse:
        return _error_response(422, E_BAD_REQUEST, str(exc))

    @app.exception_handler(StarletteHTTPException)
    def _http_exception_handler(_request: Request, exc: StarletteHTTPException) -> JSONResponse:
        # framework-raised errors (unknown path, bad method) keep the same shape
        code = {404: "E_NOT_FOUND", 405: "E_METHOD_NOT_ALLOWED"}.get(exc.status_code, E_BAD_REQUEST)
        return _error_response(exc.status_code, code, str(exc.detail))

    @app.exception_handler(BadRequest)
    def _bad_request_handler(_request: Request, exc: BadRequest) -> JSONResponse:
        return _error_response(422, exc.code, exc.message)

    def _resolve_or_response(body: Any) -> ResolvedPrompt | JSONResponse:
        snapshot = holder.snapshot()
        if snapshot is None:
            return _error_response(503, E_NO_REGISTRY, "no pack registry is loaded")
        request = _parse_prompt_request(body)
        outcome = resolve(snapshot.registry, request)
        if isinstance(outcome, ResolveError):
            if outcome.code in (E_UNKNOWN_STATIC, E_UNKNOWN_TEMPLATE):
                return _error_response(404, outcome.code, outcome.message)
            assert outcome.report is not None
            return JSONResponse(
                status_code=422,
                content={
                    "error": outcome.code,
                    "message": outcome.message,
                    "items": _report_obj(outcome.report),
                },
            )
        return outcome

    @app.get("/api/health")
    def health() -> dict:
        snapshot = holder.snapshot()
        provider = settings.provider
        key_missing = provider.kind == PROVIDER_OPENAI_COMPATIBLE and not os.environ.get(
            provider.api_key_ref
        )
        degraded = snapshot is None or key_missing
        return {
            "status": "degraded" if degraded else "ok",
            "pack_version": snapshot.pack_version if snapshot else None,
            "provider_kind": provider.kind,
        }

    @app.get("/api/templates")
    def list_templates():
        snapshot = holder.snapshot()
        if snapshot is None:
            return _error_response(503, E_NO_REGISTRY, "no pack registry is loaded")
        out = []
        for entry in snapshot.registry.templates.values():
            out.append(
                {
                    "id": entry.template.id,
                    "name": entry.template.name,
                    "version": entry.template.version,
                    "slots": [
                        slot_spec_to_obj(spec)
                        for spec in effective_slots(entry.template, entry.schema)
                    ],
                }
            )
        return out

    @app.get("/api/statics")
    def list_statics():
        snapshot = holder.snapshot()
        if snapshot is None:
            return _error_response(503, E_NO_REGISTRY, "no pack registry is loaded")
        return [
            {"id": prompt.id, "label": prompt.label}
            for prompt in snapshot.registry.statics.values()
        ]

    @app.post("/api/preview")
    def preview(body: dict):
        outcome = _resolve_or_response(body)
        if isinstance(outcome, JSONResponse):
            return outcome
        return _resolved_obj(outcome)

    @app.post("/api/feedback")
    def feedback(body: dict):
        outcome = _resolve_or_response(body)
        if isinstance(outcome, JSONResponse):
            return outcome
        request = _parse_prompt_request(body)
        if not outcome.text:
            return _error_response(422, E_EMPTY_PROMPT, "resolved prompt is empty")
        job_id = uuid.uuid4().hex
        try:
            with gateway_slots:
                result = complete(settings.provider, outcome, transport=transport)
        except GatewayError as exc:
            job = FeedbackJob(job_id, request, outcome, exc, STATE_FAILED)
            history.append(job)
            status = 504 if exc.kind == E_TIMEOUT else 502
            return _error_response(status, exc.kind, exc.message, job=_job_obj(job))
        job = FeedbackJob(job_id, request, outcome, result, STATE_DONE)
        history.append(job)
        return {"job": _job_obj(job)}

    @app.post("/api/reload")
    def reload_packs():
        try:
            snapshot = holder.reload()
        except (PackError, NotADirectoryError) as exc:
            return _error_response(422, PackError.code, str(exc))
        return {"pack_version": snapshot.pack_version, "loaded_at": snapshot.loaded_at}

    if settings.ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=settings.ui_dir, html=True), name="ui")

    return app


def run(settings: ServiceSettings | None = None, bind_addr: str | None = None) -> None:
    """Run the service under uvicorn; BIND_ADDR has the form host:port."""
    import uvicorn

    bind = bind_addr or os.environ.get("BIND_ADDR", "127.0.0.1:8080")
    host, _, port = bind.rpartition(":")
    uvicorn.run(create_app(settings), host=host or "127.0.0.1", port=int(port))
