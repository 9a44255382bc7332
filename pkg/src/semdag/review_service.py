"""HTTP API backing the human review interface.

Versioned endpoints under /api/v1 expose candidate listing, a full review
payload (graph, figure, resolved evidence texts), the two review gates,
and the audit log. Writes carry the client's last-seen version; a stale
version is a 409 so concurrent reviewers never clobber each other.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, ConfigDict

from .core import edit_from_dict, topological_order
from .document import ParsedDocument, ingest_parsed_document
from .errors import (
    BudgetExceededError,
    EditError,
    InvalidTransitionError,
    SemdagError,
    UnknownElementError,
    VersionConflictError,
)
from .review import EDIT_BUDGET, CandidateState, CandidateStore
from .serialization import dag_to_dict

logger = logging.getLogger(__name__)


class ScopeRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    decision: str  # in_scope | out_of_scope
    reason: str | None = None
    actor: str = "reviewer"
    version: int


class QualityRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    action: str  # approve | reject | edit
    reason: str | None = None
    edit: dict | None = None
    actor: str = "reviewer"
    version: int


def _state_summary(state: CandidateState) -> dict[str, Any]:
    return {
        "candidate_id": state.candidate_id,
        "status": state.status.value,
        "scope_passed": state.scope_passed,
        "edit_count": state.edit_count,
        "edit_budget": EDIT_BUDGET,
        "version": state.version,
        "reject_reason": state.reject_reason,
    }


def _document_for(state: CandidateState, corpus_dir: Path) -> ParsedDocument | None:
    doc_path = state.meta.get("doc_path")
    if not doc_path:
        return None
    path = Path(doc_path)
    if not path.is_absolute():
        path = corpus_dir / path
    if not path.exists():
        return None
    return ingest_parsed_document(path)


def _evidence_panel(state: CandidateState, doc: ParsedDocument | None) -> dict[str, Any]:
    """Per-node and per-edge evidence with resolved block texts."""
    block_map = doc.block_map() if doc is not None else {}

    def resolve(refs) -> list[dict[str, str]]:
        out = []
        for ref in refs:
            block = block_map.get(ref)
            out.append({"block_id": ref, "text": block.text if block else ""})
        return out

    return {
        "nodes": {node.id: resolve(node.evidence) for node in state.dag.nodes},
        "edges": {f"{edge.source}->{edge.target}": resolve(edge.evidence) for edge in state.dag.edges},
    }


def create_app(store: CandidateStore, corpus_dir: str | Path = ".", static_dir: str | Path | None = None) -> FastAPI:
    corpus_dir = Path(corpus_dir)
    app = FastAPI(title="semdag review service", version="1")

    def load_or_404(candidate_id: str) -> CandidateState:
        try:
            return store.load(candidate_id)
        except SemdagError:
            raise HTTPException(status_code=404, detail=f"unknown candidate {candidate_id!r}")

    @app.get("/healthz")
    def healthz() -> dict:
        return {"ok": True, "candidates": len(store.candidate_ids())}

    @app.get("/api/v1/candidates")
    def list_candidates(status: str | None = None) -> list[dict]:
        summaries = [_state_summary(store.load(cid)) for cid in store.candidate_ids()]
        if status is not None:
            summaries = [s for s in summaries if s["status"] == status]
        return summaries

    @app.get("/api/v1/candidates/{candidate_id}")
    def get_candidate(candidate_id: str) -> dict:
        state = load_or_404(candidate_id)
        doc = _document_for(state, corpus_dir)
        try:
            topo = list(topological_order(state.dag))
        except SemdagError:
            topo = [n.id for n in state.dag.nodes]
        return {
            **_state_summary(state),
            "dag": dag_to_dict(state.dag),
            "topological_order": topo,
            "figure": {
                "figure_id": state.meta.get("figure_id"),
                "image_url": f"/api/v1/candidates/{candidate_id}/figure",
            },
            "evidence": _evidence_panel(state, doc),
        }

    @app.get("/api/v1/candidates/{candidate_id}/figure")
    def get_figure(candidate_id: str) -> FileResponse:
        state = load_or_404(candidate_id)
        image_ref = state.meta.get("image_ref")
        if not image_ref:
            raise HTTPException(status_code=404, detail="candidate has no figure image")
        path = Path(image_ref)
        if not path.is_absolute():
            path = corpus_dir / path
        if not path.exists():
            raise HTTPException(status_code=404, detail="figure image not found")
        return FileResponse(path)

    @app.get("/api/v1/candidates/{candidate_id}/audit")
    def get_audit(candidate_id: str) -> list[dict]:
        load_or_404(candidate_id)
        return store.events(candidate_id)

    @app.post("/api/v1/candidates/{candidate_id}/scope")
    def post_scope(candidate_id: str, body: ScopeRequest) -> dict:
        load_or_404(candidate_id)
        try:
            state = store.scope_decision(
                candidate_id, body.decision, body.actor, reason=body.reason, expected_version=body.version
            )
        except VersionConflictError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except InvalidTransitionError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return _state_summary(state)

    @app.post("/api/v1/candidates/{candidate_id}/quality")
    def post_quality(candidate_id: str, body: QualityRequest) -> dict:
        load_or_404(candidate_id)
        edit = None
        if body.edit is not None:
            try:
                edit = edit_from_dict(body.edit)
            except (UnknownElementError, KeyError) as exc:
                raise HTTPException(status_code=422, detail=f"bad edit payload: {exc}")
        try:
            state = store.quality_action(
                candidate_id,
                body.action,
                body.actor,
                reason=body.reason,
                edit=edit,
                expected_version=body.version,
            )
        except VersionConflictError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except BudgetExceededError as exc:
            raise HTTPException(status_code=422, detail=f"budget_exceeded: {exc}")
        except (InvalidTransitionError, EditError, UnknownElementError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return _state_summary(state)

    if static_dir is not None and Path(static_dir).exists():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app


def serve(store_dir: str | Path, corpus_dir: str | Path, port: int = 8040, static_dir: str | Path | None = None) -> None:
    """Run the review service (blocking)."""
    import uvicorn

    app = create_app(CandidateStore(store_dir), corpus_dir, static_dir=static_dir)
    uvicorn.run(app, host="127.0.0.1", port=port)
