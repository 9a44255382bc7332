"""Semantic DAG data model, structural validation, ordering, and edits.

A semantic DAG couples a directed acyclic graph with the document evidence
and context that explain it: per-node and per-edge text-block citations,
graph-level theme/domain tags, and provenance back to the source paper.
All types are immutable values; operations return new graphs.
"""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, replace
from typing import Union

from .errors import EditError, StructureError, UnknownElementError

# Node ids and block references are plain string tokens; comparisons use
# canonical_id() so that "BMI " and "bmi" name the same node.
NodeId = str
BlockRef = str

EDIT_BUDGET = 5


def canonical_id(value: str) -> str:
    """Canonical form of a node identifier: trimmed and case-folded."""
    return value.strip().casefold()


class Nature(str, enum.Enum):
    """Whether a graph has a concrete real-world interpretation."""

    TECHNICAL = "technical"
    ABSTRACT = "abstract"


KNOWN_SOURCE_REPOS = ("arxiv", "biorxiv", "synthetic")


@dataclass(frozen=True, slots=True)
class DagNode:
    """A graph vertex with its label, aliases, and cited evidence blocks."""

    id: NodeId
    label: str
    aliases: tuple[str, ...] = ()
    description: str = ""
    evidence: tuple[BlockRef, ...] = ()


@dataclass(frozen=True, slots=True)
class DagEdge:
    """A directed edge with its description and cited evidence blocks."""

    source: NodeId
    target: NodeId
    description: str = ""
    evidence: tuple[BlockRef, ...] = ()

    def key(self) -> tuple[str, str]:
        """Canonical (source, target) pair used for uniqueness and lookup."""
        return (canonical_id(self.source), canonical_id(self.target))


@dataclass(frozen=True, slots=True)
class GraphContext:
    """Graph-level interpretation: theme, domain tags, category, nature."""

    theme: str = ""
    domains: tuple[str, ...] = ()
    category: str = ""
    nature: Nature = Nature.TECHNICAL


@dataclass(frozen=True, slots=True)
class Provenance:
    """Where the graph came from: paper, repository, and figure."""

    paper_id: str
    source_repo: str
    figure_id: str | None = None


@dataclass(frozen=True, slots=True)
class SemanticDag:
    """An augmented DAG: structure plus document-grounded semantics.

    The dataclass itself can hold structurally invalid graphs (that is what
    ``validate_structure`` reports on); parsing and editing entry points
    refuse to produce invalid values.
    """

    provenance: Provenance
    context: GraphContext
    nodes: tuple[DagNode, ...] = ()
    edges: tuple[DagEdge, ...] = ()

    def node_ids(self) -> tuple[NodeId, ...]:
        return tuple(n.id for n in self.nodes)

    def find_node(self, node_id: NodeId) -> DagNode | None:
        """Look up a node by canonical id."""
        wanted = canonical_id(node_id)
        for node in self.nodes:
            if canonical_id(node.id) == wanted:
                return node
        return None

    def find_edge(self, source: NodeId, target: NodeId) -> DagEdge | None:
        """Look up an edge by canonical (source, target) pair."""
        wanted = (canonical_id(source), canonical_id(target))
        for edge in self.edges:
            if edge.key() == wanted:
                return edge
        return None


@dataclass(frozen=True, slots=True)
class Finding:
    """One validator observation: a check name and a human-readable detail."""

    check: str
    detail: str


@dataclass(frozen=True, slots=True)
class ValidationReport:
    """Validator output; a graph is structurally valid iff hard_failures is empty."""

    hard_failures: tuple[Finding, ...] = ()
    warnings: tuple[Finding, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.hard_failures


# ---------------------------------------------------------------------------
# Structural validation


def _adjacency(dag: SemanticDag) -> tuple[list[str], dict[str, set[str]]]:
    """Canonical node list and deduplicated adjacency, ignoring self-loops
    and edges with dangling endpoints (those are reported separately)."""
    ids = sorted({canonical_id(n.id) for n in dag.nodes})
    present = set(ids)
    adj: dict[str, set[str]] = {i: set() for i in ids}
    for edge in dag.edges:
        s, t = edge.key()
        if s == t or s not in present or t not in present:
            continue
        adj[s].add(t)
    return ids, adj


def _cycle_components(ids: list[str], adj: dict[str, set[str]]) -> list[tuple[str, ...]]:
    """Strongly connected components of size > 1, i.e. the directed cycles.

    Kahn's algorithm peels acyclic nodes; an iterative Tarjan pass over the
    leftover subgraph separates actual cycle members from their descendants.
    """
    indeg = {i: 0 for i in ids}
    for s in ids:
        for t in adj[s]:
            indeg[t] += 1
    ready = [i for i in ids if indeg[i] == 0]
    seen = 0
    while ready:
        node = ready.pop()
        seen += 1
        for t in adj[node]:
            indeg[t] -= 1
            if indeg[t] == 0:
                ready.append(t)
    if seen == len(ids):
        return []

    leftover = sorted(i for i in ids if indeg[i] > 0)
    sub = {i: sorted(t for t in adj[i] if indeg[t] > 0) for i in leftover}

    # Iterative Tarjan over the leftover subgraph.
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    counter = 0
    components: list[tuple[str, ...]] = []

    for root in leftover:
        if root in index:
            continue
        work: list[tuple[str, int]] = [(root, 0)]
        while work:
            node, child_i = work[-1]
            if child_i == 0:
                index[node] = low[node] = counter
                counter += 1
                stack.append(node)
                on_stack.add(node)
            advanced = False
            children = sub[node]
            while child_i < len(children):
                child = children[child_i]
                child_i += 1
                if child not in index:
                    work[-1] = (node, child_i)
                    work.append((child, 0))
                    advanced = True
                    break
                if child in on_stack:
                    low[node] = min(low[node], index[child])
            if advanced:
                continue
            work.pop()
            if low[node] == index[node]:
                component = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    component.append(member)
                    if member == node:
                        break
                if len(component) > 1:
                    components.append(tuple(sorted(component)))
            if work:
                parent, _ = work[-1]
                low[parent] = min(low[parent], low[node])
    components.sort()
    return components


def _weakly_connected(dag: SemanticDag) -> bool:
    """Union-find over the undirected projection, ignoring unresolvable edges."""
    ids = sorted({canonical_id(n.id) for n in dag.nodes})
    if len(ids) <= 1:
        return True
    parent = {i: i for i in ids}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for edge in dag.edges:
        s, t = edge.key()
        if s in parent and t in parent:
            rs, rt = find(s), find(t)
            if rs != rt:
                parent[rs] = rt
    return len({find(i) for i in ids}) == 1


def validate_structure(dag: SemanticDag) -> ValidationReport:
    """Report every structural violation; never raises.

    Hard failures: duplicate node ids, dangling edge endpoints, self-loops,
    duplicate edges, directed cycles. Warnings: empty graph, and failure of
    weak connectivity (the classification stage expects a single connected
    DAG, but connectivity is not a pre-review reject).
    """
    hard: list[Finding] = []
    warnings: list[Finding] = []

    seen: dict[str, str] = {}
    for node in dag.nodes:
        canon = canonical_id(node.id)
        if canon in seen:
            hard.append(
                Finding("duplicate_node_id", f"node id {node.id!r} duplicates {seen[canon]!r}")
            )
        else:
            seen[canon] = node.id

    known = set(seen)
    seen_edges: set[tuple[str, str]] = set()
    for edge in dag.edges:
        s, t = edge.key()
        for endpoint, raw in ((s, edge.source), (t, edge.target)):
            if endpoint not in known:
                hard.append(
                    Finding("dangling_edge", f"edge {edge.source!r}->{edge.target!r} references unknown node {raw!r}")
                )
        if s == t:
            hard.append(Finding("self_loop", f"edge {edge.source!r}->{edge.target!r} is a self-loop"))
        if (s, t) in seen_edges:
            hard.append(Finding("duplicate_edge", f"edge {edge.source!r}->{edge.target!r} appears more than once"))
        seen_edges.add((s, t))

    ids, adj = _adjacency(dag)
    for component in _cycle_components(ids, adj):
        hard.append(Finding("cycle", "directed cycle through nodes: " + ", ".join(component)))

    if not dag.nodes:
        warnings.append(Finding("empty_graph", "graph has no nodes"))
    elif not _weakly_connected(dag):
        warnings.append(Finding("disconnected", "graph is not weakly connected"))

    return ValidationReport(hard_failures=tuple(hard), warnings=tuple(warnings))


def check_field_invariants(dag: SemanticDag) -> tuple[Finding, ...]:
    """Field-level invariants enforced at parse/edit boundaries.

    These complement validate_structure: empty ids/labels, duplicate aliases
    after case-folding, duplicate domains, and provenance completeness.
    """
    findings: list[Finding] = []
    if not dag.provenance.paper_id.strip():
        findings.append(Finding("empty_paper_id", "provenance.paper_id must be non-empty"))
    if not dag.provenance.source_repo.strip():
        findings.append(Finding("empty_source_repo", "provenance.source_repo must be non-empty"))
    if dag.provenance.source_repo != "synthetic" and not dag.provenance.figure_id:
        findings.append(
            Finding("missing_figure_id", "provenance.figure_id is required unless source_repo is synthetic")
        )
    for node in dag.nodes:
        if not canonical_id(node.id):
            findings.append(Finding("empty_node_id", f"node label {node.label!r} has an empty id"))
        if not node.label.strip():
            findings.append(Finding("empty_label", f"node {node.id!r} has an empty label"))
        folded = [a.strip().casefold() for a in node.aliases]
        if len(folded) != len(set(folded)):
            findings.append(Finding("duplicate_alias", f"node {node.id!r} has duplicate aliases after case-folding"))
    domains = [d.strip() for d in dag.context.domains]
    if len(domains) != len(set(domains)):
        findings.append(Finding("duplicate_domain", "context.domains contains duplicates"))
    return tuple(findings)


# ---------------------------------------------------------------------------
# Ordering


def topological_order(dag: SemanticDag) -> tuple[NodeId, ...]:
    """Nodes ordered so every edge goes forward; ties broken lexicographically.

    Raises StructureError when the graph has hard structural failures.
    """
    report = validate_structure(dag)
    if not report.ok:
        raise StructureError(report.hard_failures)

    by_canon = {canonical_id(n.id): n.id for n in dag.nodes}
    ids, adj = _adjacency(dag)
    indeg = {i: 0 for i in ids}
    for s in ids:
        for t in adj[s]:
            indeg[t] += 1
    ready = [i for i in ids if indeg[i] == 0]
    heapq.heapify(ready)
    order: list[NodeId] = []
    while ready:
        node = heapq.heappop(ready)
        order.append(by_canon[node])
        for t in sorted(adj[node]):
            indeg[t] -= 1
            if indeg[t] == 0:
                heapq.heappush(ready, t)
    return tuple(order)


# ---------------------------------------------------------------------------
# Edits


@dataclass(frozen=True, slots=True)
class AddNode:
    node: DagNode


@dataclass(frozen=True, slots=True)
class RemoveNode:
    node_id: NodeId


@dataclass(frozen=True, slots=True)
class RenameNode:
    node_id: NodeId
    new_id: NodeId


@dataclass(frozen=True, slots=True)
class AddEdge:
    edge: DagEdge


@dataclass(frozen=True, slots=True)
class RemoveEdge:
    source: NodeId
    target: NodeId


@dataclass(frozen=True, slots=True)
class RedirectEdge:
    source: NodeId
    target: NodeId
    new_source: NodeId
    new_target: NodeId


@dataclass(frozen=True, slots=True)
class ReplaceEvidence:
    """New evidence for a node (node_id set) or an edge (edge set)."""

    evidence: tuple[BlockRef, ...]
    node_id: NodeId | None = None
    edge: tuple[NodeId, NodeId] | None = None


@dataclass(frozen=True, slots=True)
class ReplaceDescription:
    description: str
    node_id: NodeId | None = None
    edge: tuple[NodeId, NodeId] | None = None


Edit = Union[
    AddNode,
    RemoveNode,
    RenameNode,
    AddEdge,
    RemoveEdge,
    RedirectEdge,
    ReplaceEvidence,
    ReplaceDescription,
]


def _require_node(dag: SemanticDag, node_id: NodeId) -> DagNode:
    node = dag.find_node(node_id)
    if node is None:
        raise UnknownElementError(f"no node with id {node_id!r}")
    return node


def _require_edge(dag: SemanticDag, source: NodeId, target: NodeId) -> DagEdge:
    edge = dag.find_edge(source, target)
    if edge is None:
        raise UnknownElementError(f"no edge {source!r}->{target!r}")
    return edge


def _element_target(dag: SemanticDag, edit: ReplaceEvidence | ReplaceDescription) -> DagNode | DagEdge:
    if (edit.node_id is None) == (edit.edge is None):
        raise UnknownElementError("edit must target exactly one of node_id or edge")
    if edit.node_id is not None:
        return _require_node(dag, edit.node_id)
    return _require_edge(dag, edit.edge[0], edit.edge[1])


def apply_edit(dag: SemanticDag, edit: Edit) -> SemanticDag:
    """Apply one review edit and return the new graph.

    One call is one unit toward the manual-edit budget. The result is
    re-validated: an edit that would introduce a hard failure (e.g. a
    redirect creating a cycle) raises EditError with the findings and
    leaves the input untouched.
    """
    if isinstance(edit, AddNode):
        result = replace(dag, nodes=dag.nodes + (edit.node,))
    elif isinstance(edit, RemoveNode):
        node = _require_node(dag, edit.node_id)
        canon = canonical_id(node.id)
        kept_edges = tuple(e for e in dag.edges if canon not in e.key())
        result = replace(
            dag,
            nodes=tuple(n for n in dag.nodes if n is not node),
            edges=kept_edges,
        )
    elif isinstance(edit, RenameNode):
        node = _require_node(dag, edit.node_id)
        canon = canonical_id(node.id)
        new_nodes = tuple(replace(n, id=edit.new_id) if n is node else n for n in dag.nodes)
        new_edges = tuple(
            replace(
                e,
                source=edit.new_id if canonical_id(e.source) == canon else e.source,
                target=edit.new_id if canonical_id(e.target) == canon else e.target,
            )
            for e in dag.edges
        )
        result = replace(dag, nodes=new_nodes, edges=new_edges)
    elif isinstance(edit, AddEdge):
        _require_node(dag, edit.edge.source)
        _require_node(dag, edit.edge.target)
        result = replace(dag, edges=dag.edges + (edit.edge,))
    elif isinstance(edit, RemoveEdge):
        edge = _require_edge(dag, edit.source, edit.target)
        result = replace(dag, edges=tuple(e for e in dag.edges if e is not edge))
    elif isinstance(edit, RedirectEdge):
        edge = _require_edge(dag, edit.source, edit.target)
        _require_node(dag, edit.new_source)
        _require_node(dag, edit.new_target)
        new_edge = replace(edge, source=edit.new_source, target=edit.new_target)
        result = replace(dag, edges=tuple(new_edge if e is edge else e for e in dag.edges))
    elif isinstance(edit, ReplaceEvidence):
        element = _element_target(dag, edit)
        if isinstance(element, DagNode):
            new_node = replace(element, evidence=tuple(edit.evidence))
            result = replace(dag, nodes=tuple(new_node if n is element else n for n in dag.nodes))
        else:
            new_edge = replace(element, evidence=tuple(edit.evidence))
            result = replace(dag, edges=tuple(new_edge if e is element else e for e in dag.edges))
    elif isinstance(edit, ReplaceDescription):
        element = _element_target(dag, edit)
        if isinstance(element, DagNode):
            new_node = replace(element, description=edit.description)
            result = replace(dag, nodes=tuple(new_node if n is element else n for n in dag.nodes))
        else:
            new_edge = replace(element, description=edit.description)
            result = replace(dag, edges=tuple(new_edge if e is element else e for e in dag.edges))
    else:
        raise UnknownElementError(f"unsupported edit type {type(edit).__name__}")

    report = validate_structure(result)
    findings = report.hard_failures + check_field_invariants(result)
    if findings:
        raise EditError(findings)
    return result


# Edit <-> dict conversion, used by the review event log and the HTTP API.

_EDIT_OPS = {
    "add_node": AddNode,
    "remove_node": RemoveNode,
    "rename_node": RenameNode,
    "add_edge": AddEdge,
    "remove_edge": RemoveEdge,
    "redirect_edge": RedirectEdge,
    "replace_evidence": ReplaceEvidence,
    "replace_description": ReplaceDescription,
}
_EDIT_NAMES = {cls: name for name, cls in _EDIT_OPS.items()}


def _node_to_dict(node: DagNode) -> dict:
    return {
        "id": node.id,
        "label": node.label,
        "aliases": list(node.aliases),
        "description": node.description,
        "evidence": list(node.evidence),
    }


def _edge_to_dict(edge: DagEdge) -> dict:
    return {
        "source": edge.source,
        "target": edge.target,
        "description": edge.description,
        "evidence": list(edge.evidence),
    }


def edit_to_dict(edit: Edit) -> dict:
    """JSON-compatible representation of an edit, tagged by op name."""
    op = _EDIT_NAMES[type(edit)]
    data: dict = {"op": op}
    if isinstance(edit, AddNode):
        data["node"] = _node_to_dict(edit.node)
    elif isinstance(edit, RemoveNode):
        data["node_id"] = edit.node_id
    elif isinstance(edit, RenameNode):
        data.update(node_id=edit.node_id, new_id=edit.new_id)
    elif isinstance(edit, AddEdge):
        data["edge"] = _edge_to_dict(edit.edge)
    elif isinstance(edit, RemoveEdge):
        data.update(source=edit.source, target=edit.target)
    elif isinstance(edit, RedirectEdge):
        data.update(
            source=edit.source,
            target=edit.target,
            new_source=edit.new_source,
            new_target=edit.new_target,
        )
    elif isinstance(edit, (ReplaceEvidence, ReplaceDescription)):
        if edit.node_id is not None:
            data["node_id"] = edit.node_id
        else:
            data["edge"] = list(edit.edge)
        if isinstance(edit, ReplaceEvidence):
            data["evidence"] = list(edit.evidence)
        else:
            data["description"] = edit.description
    return data


def edit_from_dict(data: dict) -> Edit:
    """Inverse of edit_to_dict; raises UnknownElementError on a bad op tag."""
    op = data.get("op")
    if op not in _EDIT_OPS:
        raise UnknownElementError(f"unknown edit op {op!r}")
    if op == "add_node":
        n = data["node"]
        return AddNode(
            DagNode(
                id=n["id"],
                label=n["label"],
                aliases=tuple(n.get("aliases", ())),
                description=n.get("description", ""),
                evidence=tuple(n.get("evidence", ())),
            )
        )
    if op == "remove_node":
        return RemoveNode(node_id=data["node_id"])
    if op == "rename_node":
        return RenameNode(node_id=data["node_id"], new_id=data["new_id"])
    if op == "add_edge":
        e = data["edge"]
        return AddEdge(
            DagEdge(
                source=e["source"],
                target=e["target"],
                description=e.get("description", ""),
                evidence=tuple(e.get("evidence", ())),
            )
        )
    if op == "remove_edge":
        return RemoveEdge(source=data["source"], target=data["target"])
    if op == "redirect_edge":
        return RedirectEdge(
            source=data["source"],
            target=data["target"],
            new_source=data["new_source"],
            new_target=data["new_target"],
        )
    node_id = data.get("node_id")
    edge = tuple(data["edge"]) if "edge" in data else None
    if op == "replace_evidence":
        return ReplaceEvidence(evidence=tuple(data["evidence"]), node_id=node_id, edge=edge)
    return ReplaceDescription(description=data["description"], node_id=node_id, edge=edge)
