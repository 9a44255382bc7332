"""Dataset release export, external synthetic-source import, and the data card.

A release bundle is deterministic: one canonical graph per line grouped by
source, ordered by (source, paper_id, figure_id), plus a manifest carrying
the schema version, per-source counts, and per-file content hashes so
downstream benchmarks can pin exact data.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

from .collection import FunnelRow, render_funnel_table
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
from .errors import ExportError, SemdagError
from .metrics import SummaryStats
from .review import KEPT_STATUSES, CandidateStore
from .serialization import SCHEMA_VERSION, serialize_canonical

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True, slots=True)
class ImportRejection:
    record_id: str
    detail: str


def export_dataset(store: CandidateStore, out_dir: str | Path) -> dict:
    """Write the release bundle for a store of kept candidates.

    Refuses — naming the offenders — when the store contains any candidate
    whose status is not approved/approved_with_edits. Byte-identical across
    reruns over unchanged content.
    """
    candidate_ids = store.candidate_ids()
    offenders = []
    states = []
    for candidate_id in candidate_ids:
        state = store.load(candidate_id)
        if state.status not in KEPT_STATUSES:
            offenders.append(f"{candidate_id} ({state.status.value})")
        states.append(state)
    if offenders:
        raise ExportError("store contains non-kept candidates: " + ", ".join(offenders))

    return export_graphs((s.dag for s in states), out_dir)


def export_graphs(dags: Iterable[SemanticDag], out_dir: str | Path) -> dict:
    """Write canonical graphs grouped per source plus the manifest."""
    out_dir = Path(out_dir)
    data_dir = out_dir / "data"
    data_dir.mkdir(parents=True, exist_ok=True)

    def sort_key(dag: SemanticDag):
        return (dag.provenance.source_repo, dag.provenance.paper_id, dag.provenance.figure_id or "")

    by_source: dict[str, list[SemanticDag]] = {}
    for dag in sorted(dags, key=sort_key):
        by_source.setdefault(dag.provenance.source_repo, []).append(dag)

    counts: dict[str, int] = {}
    files: dict[str, str] = {}
    for source, group in sorted(by_source.items()):
        payload = b"\n".join(serialize_canonical(dag) for dag in group) + b"\n"
        relpath = f"data/{source}.jsonl"
        (out_dir / relpath).write_bytes(payload)
        counts[source] = len(group)
        files[relpath] = hashlib.sha256(payload).hexdigest()

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "counts": counts,
        "total": sum(counts.values()),
        "files": files,
    }
    (out_dir / MANIFEST_NAME).write_text(
        json.dumps(manifest, ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


def load_release(out_dir: str | Path) -> list[SemanticDag]:
    """Read every graph of a release bundle back (one per line)."""
    from .serialization import parse_semantic_dag

    out_dir = Path(out_dir)
    manifest = json.loads((out_dir / MANIFEST_NAME).read_text(encoding="utf-8"))
    dags: list[SemanticDag] = []
    for relpath in sorted(manifest["files"]):
        for line in (out_dir / relpath).read_bytes().splitlines():
            if line.strip():
                dags.append(parse_semantic_dag(line))
    return dags


# ---------------------------------------------------------------------------
# External synthetic sources


def import_external(
    records: Iterable[dict],
    source_name: str = "synthetic",
) -> tuple[list[SemanticDag], list[ImportRejection]]:
    """Map external records (nodes, directed edges, per-element text) onto
    semantic DAGs with synthetic provenance.

    Records that violate structural invariants (cycles, duplicate ids, ...)
    are rejected with detail rather than repaired. A record whose elements
    carry real-world text is technical; a purely symbolic one is abstract.
    """
    accepted: list[SemanticDag] = []
    rejections: list[ImportRejection] = []
    for i, record in enumerate(records):
        record_id = str(record.get("id", f"record_{i}"))
        try:
            dag = _record_to_dag(record, record_id, source_name)
        except (KeyError, TypeError) as exc:
            rejections.append(ImportRejection(record_id, f"malformed record: {exc}"))
            continue
        findings = validate_structure(dag).hard_failures + check_field_invariants(dag)
        if findings:
            detail = "; ".join(f"{f.check}: {f.detail}" for f in findings)
            rejections.append(ImportRejection(record_id, detail))
            continue
        accepted.append(dag)
    return accepted, rejections


def _record_to_dag(record: dict, record_id: str, source_name: str) -> SemanticDag:
    nodes = tuple(
        DagNode(
            id=str(n["id"]),
            label=str(n.get("label", n["id"])),
            description=str(n.get("text", "")),
        )
        for n in record["nodes"]
    )
    edges = tuple(
        DagEdge(
            source=str(e["source"]),
            target=str(e["target"]),
            description=str(e.get("text", "")),
        )
        for e in record["edges"]
    )
    has_referents = bool(str(record.get("story", "")).strip()) or any(n.description.strip() for n in nodes)
    context = GraphContext(
        theme=str(record.get("theme", record.get("story", ""))[:200]),
        domains=tuple(dict.fromkeys(str(d) for d in record.get("domains", ()))),
        category=str(record.get("category", "synthetic")),
        nature=Nature.TECHNICAL if has_referents else Nature.ABSTRACT,
    )
    return SemanticDag(
        provenance=Provenance(paper_id=record_id, source_repo=source_name, figure_id=None),
        context=context,
        nodes=nodes,
        edges=edges,
    )


# ---------------------------------------------------------------------------
# Data card


def render_data_card(
    stats: dict[str, dict[str, SummaryStats]],
    domain_counts: tuple[tuple[str, int], ...],
    funnel_rows: tuple[FunnelRow, ...] | None = None,
    top_k: int = 5,
) -> str:
    """Markdown data card: per-source summaries, top domain tags, raw
    word-frequency data for external visualization, and the funnel."""
    if not stats:
        raise SemdagError("render_data_card needs non-empty statistics")
    sources = sorted(stats)
    lines = ["# Dataset card", "", "## Graph statistics", ""]
    header = "| | " + " | ".join(sources) + " |"
    rule = "|---" * (len(sources) + 1) + "|"
    for unit in ("nodes", "edges"):
        lines.append(f"**{unit.capitalize()}**")
        lines.append("")
        lines.append(header)
        lines.append(rule)
        for stat_name in ("mean", "variance", "minimum", "maximum"):
            cells = []
            for source in sources:
                value = getattr(stats[source][unit], stat_name)
                cells.append(f"{value:.2f}" if isinstance(value, float) else str(value))
            lines.append(f"| {stat_name.capitalize()} | " + " | ".join(cells) + " |")
        lines.append("")

    lines.append(f"## Top {top_k} domain tags")
    lines.append("")
    lines.append("| Domain | Count |")
    lines.append("|---|---|")
    for tag, count in domain_counts[:top_k]:
        lines.append(f"| {tag} | {count} |")
    lines.append("")

    lines.append("## Domain tag frequencies")
    lines.append("")
    lines.append("```json")
    lines.append(json.dumps({tag: count for tag, count in domain_counts}, ensure_ascii=False, indent=2, sort_keys=True))
    lines.append("```")
    lines.append("")

    if funnel_rows:
        lines.append("## Pipeline funnel")
        lines.append("")
        lines.append("```")
        lines.append(render_funnel_table(funnel_rows))
        lines.append("```")
        lines.append("")
    return "\n".join(lines)
