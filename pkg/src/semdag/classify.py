"""Figure triage: does a figure depict a single in-scope DAG?

Classification is tuned for precision: only an unambiguous structured
accept from the model is an accept; abstentions, out-of-scope reasons,
and unparseable output all map to rejects so downstream annotation works
on a clean candidate pool.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .collection import FunnelLedger
from .document import FigureAsset, ParsedDocument
from .errors import GatewayError, SchemaViolationError, StageError
from .gateway import ModelGateway, ModelProfile, ModelRequest, hash_file

logger = logging.getLogger(__name__)


class RejectReason(str, enum.Enum):
    MULTIPLE_DAGS = "multiple_dags"
    TEMPORAL = "temporal"
    CYCLIC = "cyclic"
    MIXED_EDGE_SEMANTICS = "mixed_edge_semantics"
    NOT_A_GRAPH = "not_a_graph"
    DAG_LIKE_OTHER = "dag_like_other"
    PARSE_FAILURE = "parse_failure"
    MODEL_ABSTAIN = "model_abstain"


@dataclass(frozen=True, slots=True)
class ClassificationDecision:
    figure_id: str
    paper_id: str
    verdict: str  # "accept" | "reject"
    reject_reason: RejectReason | None = None
    request_key: str | None = None

    def __post_init__(self) -> None:
        assert (self.verdict == "reject") == (self.reject_reason is not None)

    @property
    def accepted(self) -> bool:
        return self.verdict == "accept"

    def to_dict(self) -> dict:
        return {
            "figure_id": self.figure_id,
            "paper_id": self.paper_id,
            "verdict": self.verdict,
            "reason": self.reject_reason.value if self.reject_reason else None,
            "request_key": self.request_key,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ClassificationDecision":
        reason = data.get("reason")
        return cls(
            figure_id=data["figure_id"],
            paper_id=data["paper_id"],
            verdict=data["verdict"],
            reject_reason=RejectReason(reason) if reason else None,
            request_key=data.get("request_key"),
        )


def figure_image_path(figure: FigureAsset, corpus_dir: str | Path) -> Path:
    """Resolve and integrity-check the figure's image file."""
    path = Path(corpus_dir) / figure.image_ref
    if not path.exists():
        raise StageError(f"figure {figure.figure_id!r}: image {path} not found")
    digest = hash_file(path)
    if digest != figure.content_hash:
        raise StageError(
            f"figure {figure.figure_id!r}: image content hash mismatch (expected {figure.content_hash}, got {digest})"
        )
    return path


def classify_figure(
    figure: FigureAsset,
    paper_id: str,
    corpus_dir: str | Path,
    gateway: ModelGateway,
    profile: ModelProfile,
) -> ClassificationDecision:
    """One decision per figure; the model sees only the image."""
    image = figure_image_path(figure, corpus_dir)
    request = ModelRequest(
        prompt_asset_id="dag_classification",
        image_parts=(str(image),),
        expected_schema_id="dag_classification.v1",
    )
    try:
        response = gateway.complete(profile, request)
    except SchemaViolationError:
        return ClassificationDecision(
            figure_id=figure.figure_id,
            paper_id=paper_id,
            verdict="reject",
            reject_reason=RejectReason.PARSE_FAILURE,
        )
    payload = response.parsed
    if payload.verdict == "accept":
        return ClassificationDecision(
            figure_id=figure.figure_id, paper_id=paper_id, verdict="accept", request_key=response.request_key
        )
    reason = RejectReason.MODEL_ABSTAIN if payload.verdict == "abstain" else RejectReason(payload.reason)
    return ClassificationDecision(
        figure_id=figure.figure_id,
        paper_id=paper_id,
        verdict="reject",
        reject_reason=reason,
        request_key=response.request_key,
    )


def classify_corpus(
    docs: Iterable[ParsedDocument],
    corpus_dir: str | Path,
    gateway: ModelGateway,
    profile: ModelProfile,
    ledger: FunnelLedger | None = None,
    skip: set[tuple[str, str]] | None = None,
) -> tuple[list[ClassificationDecision], list[tuple[str, str, str]]]:
    """Classify every figure of every document.

    Returns (decisions, retryable) where retryable lists
    (paper_id, figure_id, error) for items that failed after retries; those
    are re-queued by the caller, never silently dropped. Items in ``skip``
    are not re-classified (idempotent resume). The ledger, when given, gets
    figures_pre/figures_post counts for newly classified figures.
    """
    skip = skip or set()
    decisions: list[ClassificationDecision] = []
    retryable: list[tuple[str, str, str]] = []
    for doc in docs:
        source = doc.metadata.source_repo
        for figure in doc.figures:
            if (doc.metadata.paper_id, figure.figure_id) in skip:
                continue
            if ledger is not None:
                ledger.record(source, "figures_pre_classification")
            try:
                decision = classify_figure(figure, doc.metadata.paper_id, corpus_dir, gateway, profile)
            except (GatewayError, StageError) as exc:
                logger.warning("classification failed for %s/%s: %s", doc.metadata.paper_id, figure.figure_id, exc)
                retryable.append((doc.metadata.paper_id, figure.figure_id, str(exc)))
                continue
            decisions.append(decision)
            if ledger is not None and decision.accepted:
                ledger.record(source, "figures_post_classification")
    return decisions, retryable


def append_decisions(path: str | Path, decisions: Iterable[ClassificationDecision]) -> None:
    """Append decisions to the append-only decision log (one JSON per line)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8") as handle:
        for decision in decisions:
            handle.write(json.dumps(decision.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def read_decisions(path: str | Path) -> list[ClassificationDecision]:
    path = Path(path)
    if not path.exists():
        return []
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(ClassificationDecision.from_dict(json.loads(line)))
    return out
