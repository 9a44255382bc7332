"""Graph reconstruction and grounding for accepted figures.

The annotation model receives the figure plus the paper's chunked text and
returns a structured graph; it first re-checks that the figure is in scope
and may override the classifier. Structural pre-validation and evidence
grounding run before anything is emitted, with one bounded repair
round-trip: validator findings are appended to a single retry request.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from .core import (
    DagEdge,
    DagNode,
    GraphContext,
    Nature,
    Provenance,
    SemanticDag,
    check_field_invariants,
    validate_structure,
)
from .document import FigureAsset, ParsedDocument
from .errors import SchemaViolationError
from .gateway import AnnotationPayload, EnrichmentPayload, ModelGateway, ModelProfile, ModelRequest
from .serialization import serialize_canonical
from .classify import figure_image_path

logger = logging.getLogger(__name__)

DEFAULT_CONTEXT_BUDGET_CHARS = 12000


@dataclass(frozen=True, slots=True)
class Rejection:
    figure_id: str
    paper_id: str
    kind: str  # recheck_failed | structural | grounding | schema
    detail: str = ""


@dataclass(frozen=True, slots=True)
class AnnotationResult:
    dag: SemanticDag | None
    rejection: Rejection | None
    request_keys: tuple[str, ...] = ()

    @property
    def accepted(self) -> bool:
        return self.dag is not None


def build_context_parts(doc: ParsedDocument, figure: FigureAsset, budget_chars: int) -> tuple[str, ...]:
    """Chunk texts sent with the figure, each block prefixed with its id.

    The figure's caption chunk and its neighbours get priority under the
    character budget; selected chunks are then re-assembled in document
    order so the model reads coherent text.
    """
    block_map = doc.block_map()
    chunk_texts: list[str] = []
    for chunk in doc.chunks:
        parts = [f"[{bid}] {block_map[bid].text}" for bid in chunk.block_ids]
        chunk_texts.append("\n".join(parts))

    caption_idx = 0
    if figure.caption_block is not None:
        for i, chunk in enumerate(doc.chunks):
            if figure.caption_block in chunk.block_ids:
                caption_idx = i
                break

    order = sorted(range(len(doc.chunks)), key=lambda i: (abs(i - caption_idx), i))
    selected: set[int] = set()
    used = 0
    for i in order:
        cost = len(chunk_texts[i])
        if selected and used + cost > budget_chars:
            continue
        selected.add(i)
        used += cost
    return tuple(chunk_texts[i] for i in sorted(selected))


def payload_to_dag(payload: AnnotationPayload, provenance: Provenance) -> SemanticDag:
    """Map a validated annotation payload onto the graph model."""
    nodes = tuple(
        DagNode(
            id=n.id,
            label=n.label,
            aliases=tuple(n.aliases),
            description=n.description,
            evidence=tuple(n.evidence),
        )
        for n in payload.nodes
    )
    edges = tuple(
        DagEdge(
            source=e.source,
            target=e.target,
            description=e.description,
            evidence=tuple(e.evidence),
        )
        for e in payload.edges
    )
    nature = Nature.ABSTRACT if payload.abstract else Nature.TECHNICAL
    context = GraphContext(category=payload.category, nature=nature)
    return SemanticDag(provenance=provenance, context=context, nodes=nodes, edges=edges)


def dangling_evidence(dag: SemanticDag, doc: ParsedDocument) -> tuple[str, ...]:
    """Cited block ids that do not resolve in the document."""
    known = {b.block_id for b in doc.blocks}
    missing: list[str] = []
    for node in dag.nodes:
        missing.extend(ref for ref in node.evidence if ref not in known)
    for edge in dag.edges:
        missing.extend(ref for ref in edge.evidence if ref not in known)
    return tuple(dict.fromkeys(missing))


def _check_candidate(dag: SemanticDag, doc: ParsedDocument) -> tuple[str, str] | None:
    """Return (kind, detail) for the first failure class, or None when clean."""
    report = validate_structure(dag)
    findings = report.hard_failures + check_field_invariants(dag)
    if findings:
        return "structural", "; ".join(f"{f.check}: {f.detail}" for f in findings)
    if not dag.nodes:
        return "structural", "empty_graph: annotation produced no nodes"
    missing = dangling_evidence(dag, doc)
    if missing:
        return "grounding", "dangling evidence block ids: " + ", ".join(missing)
    return None


def annotate_figure(
    figure: FigureAsset,
    doc: ParsedDocument,
    corpus_dir: str | Path,
    gateway: ModelGateway,
    profile: ModelProfile,
    context_budget_chars: int = DEFAULT_CONTEXT_BUDGET_CHARS,
) -> AnnotationResult:
    """Reconstruct and ground one accepted figure.

    Every emitted graph passes structural validation with zero hard
    failures and cites only block ids that resolve in the document.
    """
    image = figure_image_path(figure, corpus_dir)
    base_parts = build_context_parts(doc, figure, context_budget_chars)
    provenance = Provenance(
        paper_id=doc.metadata.paper_id,
        source_repo=doc.metadata.source_repo,
        figure_id=figure.figure_id,
    )
    paper_figure = (f"Figure {figure.figure_id} of paper {doc.metadata.paper_id}.",)

    keys: list[str] = []
    findings_note: tuple[str, ...] = ()
    for round_idx in range(2):  # initial pass + at most one repair round-trip
        request = ModelRequest(
            prompt_asset_id="dag_annotation",
            text_parts=paper_figure + findings_note + base_parts,
            image_parts=(str(image),),
            expected_schema_id="dag_annotation.v1",
        )
        try:
            response = gateway.complete(profile, request)
        except SchemaViolationError as exc:
            return AnnotationResult(
                dag=None,
                rejection=Rejection(figure.figure_id, doc.metadata.paper_id, "schema", str(exc)),
                request_keys=tuple(keys),
            )
        keys.append(response.request_key)
        payload: AnnotationPayload = response.parsed
        if not payload.is_dag:
            return AnnotationResult(
                dag=None,
                rejection=Rejection(figure.figure_id, doc.metadata.paper_id, "recheck_failed", "model re-check says the figure is not an in-scope DAG"),
                request_keys=tuple(keys),
            )
        dag = payload_to_dag(payload, provenance)
        failure = _check_candidate(dag, doc)
        if failure is None:
            return AnnotationResult(dag=dag, rejection=None, request_keys=tuple(keys))
        kind, detail = failure
        if round_idx == 0:
            logger.info("annotation for %s/%s failed pre-validation (%s); one repair attempt", doc.metadata.paper_id, figure.figure_id, kind)
            findings_note = (f"Your previous answer was rejected by the validator: {detail}. Fix these problems and answer again.",)
            continue
        return AnnotationResult(
            dag=None,
            rejection=Rejection(figure.figure_id, doc.metadata.paper_id, kind, detail),
            request_keys=tuple(keys),
        )
    raise AssertionError("unreachable")


def enrich_context(
    dag: SemanticDag,
    doc: ParsedDocument,
    gateway: ModelGateway,
    profile: ModelProfile,
    context_budget_chars: int = DEFAULT_CONTEXT_BUDGET_CHARS,
) -> tuple[GraphContext, str]:
    """Graph-level theme/domains/nature for a structurally valid draft.

    Returns the new context and the gateway request key. Raises
    SchemaViolationError when the model output is unusable (e.g. empty
    domain list); enrichment has no abstain path.
    """
    block_map = doc.block_map()
    texts: list[str] = []
    used = 0
    for chunk in doc.chunks:
        part = "\n".join(f"[{bid}] {block_map[bid].text}" for bid in chunk.block_ids)
        if texts and used + len(part) > context_budget_chars:
            break
        texts.append(part)
        used += len(part)
    request = ModelRequest(
        prompt_asset_id="context_enrichment",
        text_parts=(serialize_canonical(dag).decode("utf-8"),) + tuple(texts),
        expected_schema_id="context_enrichment.v1",
    )
    response = gateway.complete(profile, request)
    payload: EnrichmentPayload = response.parsed
    # The annotation model's abstract flag is sticky: enrichment can only
    # confirm technical nature, never un-mark an abstract graph.
    nature = Nature.ABSTRACT if dag.context.nature is Nature.ABSTRACT else Nature(payload.nature)
    context = GraphContext(
        theme=payload.theme,
        domains=tuple(dict.fromkeys(d.strip() for d in payload.domains)),
        category=dag.context.category,
        nature=nature,
    )
    return context, response.request_key
