"""Canonical JSON serialization for semantic DAGs.

The on-disk format is one JSON object per graph with top-level keys
``provenance``, ``context``, ``nodes``, ``edges``. Canonical bytes are a
pure function of the graph value: fixed key order, nodes sorted by id,
edges sorted by (source, target), sorted alias/domain/evidence lists,
UTF-8, compact separators, no trailing newline. Dataset exports place one
canonical graph per line.

Parsing is strict: unknown fields are rejected (SchemaError with the field
path) and graphs violating structural invariants are rejected
(StructureError), keeping the dataset format stable.
"""

from __future__ import annotations

import json
from typing import Any

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
from .errors import SchemaError, StructureError

SCHEMA_VERSION = "1"

_PROVENANCE_KEYS = {"paper_id", "source_repo", "figure_id"}
_CONTEXT_KEYS = {"theme", "domains", "category", "nature"}
_NODE_KEYS = {"id", "label", "aliases", "description", "evidence"}
_EDGE_KEYS = {"source", "target", "description", "evidence"}
_TOP_KEYS = {"provenance", "context", "nodes", "edges"}


def dag_to_dict(dag: SemanticDag) -> dict[str, Any]:
    """Canonically ordered plain-dict form of a graph."""
    provenance: dict[str, Any] = {
        "paper_id": dag.provenance.paper_id,
        "source_repo": dag.provenance.source_repo,
    }
    if dag.provenance.figure_id is not None:
        provenance["figure_id"] = dag.provenance.figure_id
    return {
        "provenance": provenance,
        "context": {
            "theme": dag.context.theme,
            "domains": sorted(dag.context.domains),
            "category": dag.context.category,
            "nature": dag.context.nature.value,
        },
        "nodes": [
            {
                "id": node.id,
                "label": node.label,
                "aliases": sorted(node.aliases, key=lambda a: (a.casefold(), a)),
                "description": node.description,
                "evidence": sorted(node.evidence),
            }
            for node in sorted(dag.nodes, key=lambda n: n.id)
        ],
        "edges": [
            {
                "source": edge.source,
                "target": edge.target,
                "description": edge.description,
                "evidence": sorted(edge.evidence),
            }
            for edge in sorted(dag.edges, key=lambda e: (e.source, e.target))
        ],
    }


def serialize_canonical(dag: SemanticDag) -> bytes:
    """Deterministic byte-for-byte serialization of a graph value."""
    return json.dumps(dag_to_dict(dag), ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def _expect(obj: Any, kind: type, path: str, what: str) -> Any:
    if not isinstance(obj, kind) or isinstance(obj, bool) and kind is not bool:
        raise SchemaError(path, f"expected {what}, got {type(obj).__name__}")
    return obj


def _string(obj: Any, path: str, *, allow_empty: bool = True) -> str:
    value = _expect(obj, str, path, "a string")
    if not allow_empty and not value.strip():
        raise SchemaError(path, "must be a non-empty string")
    return value


def _string_list(obj: Any, path: str, *, unique_key=None) -> tuple[str, ...]:
    items = _expect(obj, list, path, "a list of strings")
    out: list[str] = []
    seen: set[str] = set()
    for i, item in enumerate(items):
        value = _string(item, f"{path}[{i}]")
        if unique_key is not None:
            key = unique_key(value)
            if key in seen:
                raise SchemaError(f"{path}[{i}]", f"duplicate entry {value!r}")
            seen.add(key)
        out.append(value)
    return tuple(out)


def _reject_unknown(obj: dict, allowed: set[str], path: str) -> None:
    for key in obj:
        if key not in allowed:
            raise SchemaError(f"{path}.{key}", "unknown field")


def _require(obj: dict, key: str, path: str) -> Any:
    if key not in obj:
        raise SchemaError(f"{path}.{key}", "missing required field")
    return obj[key]


def _parse_node(obj: Any, path: str) -> DagNode:
    data = _expect(obj, dict, path, "an object")
    _reject_unknown(data, _NODE_KEYS, path)
    return DagNode(
        id=_string(_require(data, "id", path), f"{path}.id", allow_empty=False),
        label=_string(_require(data, "label", path), f"{path}.label", allow_empty=False),
        aliases=_string_list(data.get("aliases", []), f"{path}.aliases", unique_key=str.casefold),
        description=_string(data.get("description", ""), f"{path}.description"),
        evidence=_string_list(data.get("evidence", []), f"{path}.evidence", unique_key=str),
    )


def _parse_edge(obj: Any, path: str) -> DagEdge:
    data = _expect(obj, dict, path, "an object")
    _reject_unknown(data, _EDGE_KEYS, path)
    return DagEdge(
        source=_string(_require(data, "source", path), f"{path}.source", allow_empty=False),
        target=_string(_require(data, "target", path), f"{path}.target", allow_empty=False),
        description=_string(data.get("description", ""), f"{path}.description"),
        evidence=_string_list(data.get("evidence", []), f"{path}.evidence", unique_key=str),
    )


def dag_from_dict(obj: Any, path: str = "$") -> SemanticDag:
    """Strictly parse a plain-dict graph; validates shape then structure."""
    data = _expect(obj, dict, path, "an object")
    _reject_unknown(data, _TOP_KEYS, path)

    prov_obj = _expect(_require(data, "provenance", path), dict, f"{path}.provenance", "an object")
    _reject_unknown(prov_obj, _PROVENANCE_KEYS, f"{path}.provenance")
    figure_id = prov_obj.get("figure_id")
    if figure_id is not None:
        figure_id = _string(figure_id, f"{path}.provenance.figure_id", allow_empty=False)
    provenance = Provenance(
        paper_id=_string(_require(prov_obj, "paper_id", f"{path}.provenance"), f"{path}.provenance.paper_id", allow_empty=False),
        source_repo=_string(_require(prov_obj, "source_repo", f"{path}.provenance"), f"{path}.provenance.source_repo", allow_empty=False),
        figure_id=figure_id,
    )

    ctx_obj = _expect(_require(data, "context", path), dict, f"{path}.context", "an object")
    _reject_unknown(ctx_obj, _CONTEXT_KEYS, f"{path}.context")
    nature_raw = _string(_require(ctx_obj, "nature", f"{path}.context"), f"{path}.context.nature")
    try:
        nature = Nature(nature_raw)
    except ValueError:
        raise SchemaError(f"{path}.context.nature", f"must be one of {[n.value for n in Nature]}, got {nature_raw!r}")
    context = GraphContext(
        theme=_string(ctx_obj.get("theme", ""), f"{path}.context.theme"),
        domains=_string_list(ctx_obj.get("domains", []), f"{path}.context.domains", unique_key=str.strip),
        category=_string(ctx_obj.get("category", ""), f"{path}.context.category"),
        nature=nature,
    )

    nodes_obj = _expect(_require(data, "nodes", path), list, f"{path}.nodes", "a list")
    nodes = tuple(_parse_node(n, f"{path}.nodes[{i}]") for i, n in enumerate(nodes_obj))
    edges_obj = _expect(_require(data, "edges", path), list, f"{path}.edges", "a list")
    edges = tuple(_parse_edge(e, f"{path}.edges[{i}]") for i, e in enumerate(edges_obj))

    dag = SemanticDag(provenance=provenance, context=context, nodes=nodes, edges=edges)
    findings = validate_structure(dag).hard_failures + check_field_invariants(dag)
    if findings:
        raise StructureError(findings)
    return dag


def parse_semantic_dag(data: bytes | str) -> SemanticDag:
    """Parse canonical (or any equivalent) JSON bytes into a validated graph."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from exc
    return dag_from_dict(obj)


def dags_equal(a: SemanticDag, b: SemanticDag) -> bool:
    """Value equality up to list ordering, via canonical bytes."""
    return serialize_canonical(a) == serialize_canonical(b)
