"""HTTP API layer: stateless JSON endpoints over the catalog and the
analysis modules, served under /api/v1.

Error bodies always carry {"code", "message"}; codes are drawn from:
not_found, no_model, empty_query, bad_limit, empty_question, invalid_body,
unknown_field, no_edits_parsed, edit_conflict, invalid_base,
analysis_failed, adapter_unavailable, adapter_timeout.
"""

from __future__ import annotations

import hashlib
import os
from typing import Any, Optional

import httpx
from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict

from .catalog import (
    BadLimit,
    Catalog,
    EmptyQuery,
    SDG_TITLES,
    SearchQuery,
    document_to_json,
)
from .graph import CausalGraph, LoopBudgetExceeded, enumerate_loops
from .layout import layout
from .narrative import (
    AdapterTimeout,
    AdapterUnavailable,
    AddLink,
    AddVariable,
    CopilotAdapter,
    CopilotReply,
    DeterministicCopilot,
    EditConflict,
    ModelEdit,
    NoEditsParsed,
    RemoveLink,
    RemoveVariable,
    RenameVariable,
    apply_edits,
    copilot_respond,
    describe,
    parse_controlled_nl,
)
from .structured import (
    DanglingReference,
    DuplicateLink,
    StructuredDiagram,
    from_structured,
    to_structured,
)
from .graph import derive_causal_graph
from .names import EmptyName, canonicalize_name

__all__ = ["create_app", "create_app_from_env", "ApiError", "HttpCopilotAdapter"]

_POLARITY_WIRE = {"positive": "+", "negative": "-", "unknown": "?"}


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, details: Optional[Any] = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.details = details


class HttpCopilotAdapter:
    """Forwards co-pilot questions to an external HTTP service."""

    def __init__(self, url: str, timeout: float = 10.0):
        self.url = url
        self.timeout = timeout

    def respond(self, question: str, diagram: StructuredDiagram) -> CopilotReply:
        try:
            resp = httpx.post(
                self.url,
                json={"question": question, "diagram": diagram.to_json_dict()},
                timeout=self.timeout,
            )
            resp.raise_for_status()
            body = resp.json()
            return CopilotReply(
                text=body["text"],
                facts_used=tuple(body.get("facts_used", [])),
                intent=body.get("intent", "external"),
            )
        except httpx.TimeoutException as e:
            raise AdapterTimeout(str(e)) from e
        except Exception as e:
            raise AdapterUnavailable(str(e)) from e


class SearchBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    text: Optional[str] = None
    sdg: Optional[int] = None
    topic: Optional[str] = None
    require_diagram: bool = False
    limit: int = 20


class CopilotBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    question: str


class ComposeBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    text: Optional[str] = None
    edits: Optional[list[dict]] = None
    base: Optional[dict] = None


def _seed_for(key: str) -> int:
    return int.from_bytes(hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest(), "big") >> 1


def _analysis_payload(graph: CausalGraph, seed: int, display_names=None, kinds=None, hints=None) -> dict:
    loops = enumerate_loops(graph)
    diagram = to_structured(graph, loops, display_names=display_names, kinds=kinds)
    placed = layout(graph, seed, hints=hints) if graph.nodes else None
    return {
        "diagram": diagram.to_json_dict(),
        "loops": diagram.to_json_dict()["loops"],
        "layout": {
            "positions": {n: [x, y] for n, (x, y) in (placed.positions.items() if placed else [])},
            "seed": seed,
        },
    }


def create_app(
    catalog: Catalog,
    adapter: Optional[CopilotAdapter] = None,
    cors_origin: Optional[str] = None,
) -> FastAPI:
    app = FastAPI(title="sdatlas", docs_url=None, redoc_url=None)
    adapter = adapter or DeterministicCopilot()
    analysis_cache: dict[str, dict] = {}

    if cors_origin:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=[cors_origin],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        body = {"code": exc.code, "message": exc.message}
        if exc.details is not None:
            body["details"] = exc.details
        return JSONResponse(status_code=exc.status, content=body)

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        code = "invalid_body"
        for err in exc.errors():
            loc = err.get("loc", ())
            if err.get("type") == "extra_forbidden":
                code = "unknown_field"
                break
            if "limit" in loc:
                code = "bad_limit"
                break
        return JSONResponse(status_code=400, content={"code": code, "message": str(exc.errors()[:3])})

    def _get_doc(doc_id: str):
        doc = catalog.get(doc_id)
        if doc is None:
            raise ApiError(404, "not_found", f"no document with id {doc_id!r}")
        return doc

    def _analysis_for(doc_id: str) -> dict:
        if doc_id in analysis_cache:
            return analysis_cache[doc_id]
        doc = _get_doc(doc_id)
        display_names = None
        kinds = None
        hints = None
        if doc.model is not None and not doc.model.error_diagnostics:
            graph = derive_causal_graph(doc.model)
            display_names = {v.name: v.display_name for v in doc.model.variables}
            kinds = {v.name: v.kind for v in doc.model.variables}
            if doc.model.views:
                hints = {h.variable: (h.x, h.y) for h in doc.model.views}
        elif doc.diagram is not None:
            graph = from_structured(doc.diagram)
            display_names = {v.name: v.display_name for v in doc.diagram.variables}
            kinds = {v.name: v.kind for v in doc.diagram.variables if v.kind}
        else:
            raise ApiError(409, "no_model", "document has neither a model nor a diagram")
        try:
            payload = _analysis_payload(graph, _seed_for(doc_id), display_names, kinds, hints)
        except LoopBudgetExceeded as e:
            raise ApiError(422, "analysis_failed", str(e)) from None
        analysis_cache[doc_id] = payload
        return payload

    @app.get("/api/v1/documents/{doc_id}")
    def get_document(doc_id: str, view: Optional[str] = Query(default=None)):
        if view not in (None, "summary", "full"):
            raise ApiError(400, "invalid_body", f"unknown view {view!r}")
        doc = _get_doc(doc_id)
        body = document_to_json(doc)
        if view == "summary":
            body.pop("model", None)
        return body

    @app.post("/api/v1/search")
    def search(body: SearchBody):
        query = SearchQuery(
            text=body.text,
            sdg=body.sdg,
            topic=body.topic,
            require_diagram=body.require_diagram,
            limit=body.limit,
        )
        try:
            results = catalog.search(query)
        except EmptyQuery as e:
            raise ApiError(400, "empty_query", str(e)) from None
        except BadLimit as e:
            raise ApiError(400, "bad_limit", str(e)) from None
        return [
            {
                "id": r.id,
                "title": r.title,
                "score": r.score,
                "keyword_score": r.keyword_score,
                "vector_score": r.vector_score,
                "matched_fields": list(r.matched_fields),
            }
            for r in results
        ]

    @app.get("/api/v1/sdgs")
    def sdgs():
        counts = {goal: 0 for goal in range(1, 18)}
        for doc_id in catalog.ids():
            doc = catalog.get(doc_id)
            for label in doc.sdg_labels:
                counts[label.goal] += 1
        return [
            {"goal": goal, "title": SDG_TITLES[goal], "document_count": counts[goal]}
            for goal in range(1, 18)
        ]

    @app.get("/api/v1/documents/{doc_id}/analysis")
    def analysis(doc_id: str):
        return _analysis_for(doc_id)

    @app.post("/api/v1/documents/{doc_id}/copilot")
    def copilot(doc_id: str, body: CopilotBody):
        if not body.question.strip():
            raise ApiError(400, "empty_question", "question must be nonempty")
        payload = _analysis_for(doc_id)
        diagram = StructuredDiagram.from_json_dict(payload["diagram"])
        try:
            reply = copilot_respond(body.question, diagram, adapter)
        except AdapterTimeout as e:
            raise ApiError(504, "adapter_timeout", str(e)) from None
        except AdapterUnavailable as e:
            raise ApiError(503, "adapter_unavailable", str(e)) from None
        return {"text": reply.text, "facts_used": list(reply.facts_used), "intent": reply.intent}

    @app.post("/api/v1/compose")
    def compose(body: ComposeBody):
        if body.base is not None:
            try:
                base_graph = from_structured(StructuredDiagram.from_json_dict(body.base))
            except (DanglingReference, DuplicateLink, KeyError, TypeError) as e:
                raise ApiError(400, "invalid_base", str(e)) from None
        else:
            base_graph = CausalGraph.build([], [])

        edits: list[ModelEdit] = []
        if body.text:
            try:
                parsed = parse_controlled_nl(body.text)
            except NoEditsParsed as e:
                raise ApiError(
                    400, "no_edits_parsed", "no sentence matched the controlled grammar",
                    details={"unparsed": e.unparsed},
                ) from None
            edits.extend(parsed.edits)
            unparsed = parsed.unparsed
        else:
            unparsed = []
        if body.edits:
            try:
                edits.extend(_edit_from_wire(e) for e in body.edits)
            except (KeyError, ValueError) as e:
                raise ApiError(400, "invalid_body", f"bad edit: {e}") from None
        if not edits:
            raise ApiError(400, "no_edits_parsed", "request provided neither text nor edits")

        try:
            graph = apply_edits(base_graph, edits)
        except EditConflict as e:
            raise ApiError(422, "edit_conflict", str(e)) from None

        loops = enumerate_loops(graph)
        diagram = to_structured(graph, loops)
        seed = _seed_for(diagram.to_json())
        placed = layout(graph, seed) if graph.nodes else None
        narrative = describe(graph, loops)
        return {
            "diagram": diagram.to_json_dict(),
            "loops": diagram.to_json_dict()["loops"],
            "layout": {
                "positions": {n: [x, y] for n, (x, y) in (placed.positions.items() if placed else [])},
                "seed": seed,
            },
            "narrative": narrative.text,
            "unparsed": unparsed,
        }

    return app


def _edit_from_wire(data: dict) -> ModelEdit:
    action = data.get("action")
    wire_polarity = {"+": "positive", "-": "negative", "?": "unknown"}
    if action == "add_link":
        return AddLink(
            canonicalize_name(data["from"]),
            canonicalize_name(data["to"]),
            wire_polarity.get(data.get("polarity", "+"), "unknown"),
        )
    if action == "remove_link":
        return RemoveLink(canonicalize_name(data["from"]), canonicalize_name(data["to"]))
    if action == "add_variable":
        return AddVariable(canonicalize_name(data["name"]))
    if action == "remove_variable":
        return RemoveVariable(canonicalize_name(data["name"]))
    if action == "rename_variable":
        return RenameVariable(canonicalize_name(data["old"]), canonicalize_name(data["new"]))
    raise ValueError(f"unknown edit action {action!r}")


def create_app_from_env() -> FastAPI:
    snapshot = os.environ.get("SDATLAS_SNAPSHOT")
    catalog = Catalog.load_snapshot(snapshot) if snapshot else Catalog()
    copilot_url = os.environ.get("SDATLAS_COPILOT_URL")
    adapter = HttpCopilotAdapter(copilot_url) if copilot_url else None
    return create_app(catalog, adapter=adapter, cors_origin=os.environ.get("SDATLAS_CORS_ORIGIN"))
