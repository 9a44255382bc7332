"""Graph-comparison metrics and dataset statistics.

Node alignment is by canonical node identity (optionally extended through
alias sets); edges incident to unmatched nodes are removed before the
aligned adjacency matrices are built. Structural difference follows the
normalized-Hamming-distance formula literally over ordered pairs, so
nhd ranges over [0, 2] and sd over [-1, 1]; a clamped display value is
reported alongside.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from statistics import pvariance
from typing import Iterable, Sequence

import numpy as np

from .core import DagNode, SemanticDag, canonical_id
from .errors import SemdagError, UndefinedStructureError

DEFAULT_EXCLUDED_DOMAINS = ("Causal Inference", "Machine Learning")


@dataclass(frozen=True, slots=True)
class AlignedAdjacency:
    """Node-matched adjacency pair (A, A_hat) over m matched nodes.

    matched_ids holds canonical ids in reference order; pairs maps each
    matched reference node id to its predicted counterpart (raw ids).
    """

    matched_ids: tuple[str, ...]
    pairs: tuple[tuple[str, str], ...]
    a_ref: np.ndarray
    a_pred: np.ndarray
    unmatched_ref: tuple[str, ...]
    unmatched_pred: tuple[str, ...]

    @property
    def m(self) -> int:
        return len(self.matched_ids)


def _alias_keys(node: DagNode) -> frozenset[str]:
    keys = {canonical_id(node.id), canonical_id(node.label)}
    keys.update(canonical_id(a) for a in node.aliases)
    keys.discard("")
    return frozenset(keys)


def align_nodes(ref: SemanticDag, pred: SemanticDag, use_aliases: bool = False) -> AlignedAdjacency:
    """Match nodes by canonical id, then (optionally) by alias overlap.

    Alias matching runs over still-unmatched pairs in deterministic order:
    reference nodes in graph order, each taking the first eligible
    predicted node whose canonical alias set intersects its own. Each node
    matches at most once. Edges incident to unmatched nodes are excluded
    from the adjacency matrices.
    """
    pred_by_canon = {canonical_id(n.id): n for n in pred.nodes}
    mapping: dict[str, DagNode] = {}  # ref node id -> pred node
    taken: set[str] = set()
    for node in ref.nodes:
        canon = canonical_id(node.id)
        match = pred_by_canon.get(canon)
        if match is not None and canonical_id(match.id) not in taken:
            mapping[node.id] = match
            taken.add(canonical_id(match.id))

    if use_aliases:
        for node in ref.nodes:
            if node.id in mapping:
                continue
            keys = _alias_keys(node)
            for candidate in pred.nodes:
                if canonical_id(candidate.id) in taken:
                    continue
                if keys & _alias_keys(candidate):
                    mapping[node.id] = candidate
                    taken.add(canonical_id(candidate.id))
                    break

    matched_ref = [n for n in ref.nodes if n.id in mapping]
    matched_ids = tuple(canonical_id(n.id) for n in matched_ref)
    index = {canonical_id(n.id): i for i, n in enumerate(matched_ref)}
    pred_index = {canonical_id(mapping[n.id].id): index[canonical_id(n.id)] for n in matched_ref}

    m = len(matched_ref)
    a_ref = np.zeros((m, m), dtype=np.int8)
    a_pred = np.zeros((m, m), dtype=np.int8)
    for edge in ref.edges:
        s, t = edge.key()
        if s in index and t in index and s != t:
            a_ref[index[s], index[t]] = 1
    for edge in pred.edges:
        s, t = edge.key()
        if s in pred_index and t in pred_index and s != t:
            a_pred[pred_index[s], pred_index[t]] = 1

    return AlignedAdjacency(
        matched_ids=matched_ids,
        pairs=tuple((n.id, mapping[n.id].id) for n in matched_ref),
        a_ref=a_ref,
        a_pred=a_pred,
        unmatched_ref=tuple(n.id for n in ref.nodes if n.id not in mapping),
        unmatched_pred=tuple(n.id for n in pred.nodes if canonical_id(n.id) not in taken),
    )


@dataclass(frozen=True, slots=True)
class StructuralDifference:
    nhd: float
    sd: float
    sd_clamped: float


def structural_difference(al: AlignedAdjacency) -> StructuralDifference:
    """Literal ordered-pair form: nhd = 2/(m(m-1)) * sum_{i!=j} [A_ij != Â_ij].

    Undefined for m <= 1 (no ordered pairs to compare); such pairs are
    excluded from SD averages and reported separately.
    """
    m = al.m
    if m <= 1:
        raise UndefinedStructureError(f"structural difference undefined for m={m}")
    mismatches = int(np.count_nonzero(al.a_ref != al.a_pred))
    nhd = 2.0 / (m * (m - 1)) * mismatches
    sd = 1.0 - nhd
    return StructuralDifference(nhd=nhd, sd=sd, sd_clamped=max(sd, 0.0))


def dag_classification_precision(predicted: int, true_dags: int) -> float:
    """DC: true single DAGs among figures predicted as DAGs."""
    if predicted <= 0:
        raise SemdagError("dag_classification_precision needs at least one predicted-DAG item")
    if not 0 <= true_dags <= predicted:
        raise SemdagError("true DAG count must lie in [0, predicted]")
    return true_dags / predicted


def dc_from_decisions(decisions: Iterable, truth: dict[str, bool]) -> float:
    """DC over a decision log plus ground truth (figure_id -> is a true DAG)."""
    predicted = [d for d in decisions if d.accepted]
    if not predicted:
        raise SemdagError("no figures were predicted as DAGs")
    true_count = sum(1 for d in predicted if truth.get(d.figure_id, False))
    return dag_classification_precision(len(predicted), true_count)


def end_to_end(kept: int, predicted: int) -> float:
    """E2E retention: usable semantic DAGs over figures predicted as DAGs."""
    if predicted <= 0:
        raise SemdagError("end_to_end needs a positive predicted count")
    if not 0 <= kept <= predicted:
        raise SemdagError("kept must lie in [0, predicted]")
    return kept / predicted


def _evidence_set(element) -> frozenset[str]:
    return frozenset(element.evidence)


def evidence_alignment(ref: SemanticDag, pred: SemanticDag, al: AlignedAdjacency) -> float:
    """EA: fraction of reference nodes and edges whose cited block ids align.

    A matched element is correct when its predicted citation set overlaps
    the reference set (references may cite several supporting blocks); an
    element uncited on both sides counts correct. Reference nodes and edges
    missing from the prediction are incorrect.
    """
    elements = len(ref.nodes) + len(ref.edges)
    if elements == 0:
        raise SemdagError("reference graph has no nodes or edges")
    mapping = dict(al.pairs)
    ref_id_by_canon = {canonical_id(n.id): n.id for n in ref.nodes}
    pred_nodes = {canonical_id(n.id): n for n in pred.nodes}
    pred_edges = {e.key(): e for e in pred.edges}

    correct = 0
    for node in ref.nodes:
        partner_id = mapping.get(node.id)
        if partner_id is None:
            continue
        partner = pred_nodes[canonical_id(partner_id)]
        ref_set, pred_set = _evidence_set(node), _evidence_set(partner)
        if (ref_set & pred_set) or (not ref_set and not pred_set):
            correct += 1
    for edge in ref.edges:
        s_ref = ref_id_by_canon.get(canonical_id(edge.source))
        t_ref = ref_id_by_canon.get(canonical_id(edge.target))
        src_partner = mapping.get(s_ref) if s_ref is not None else None
        tgt_partner = mapping.get(t_ref) if t_ref is not None else None
        if src_partner is None or tgt_partner is None:
            continue
        partner_edge = pred_edges.get((canonical_id(src_partner), canonical_id(tgt_partner)))
        if partner_edge is None:
            continue
        ref_set, pred_set = _evidence_set(edge), _evidence_set(partner_edge)
        if (ref_set & pred_set) or (not ref_set and not pred_set):
            correct += 1
    return correct / elements


# ---------------------------------------------------------------------------
# Pair reports and dataset statistics


@dataclass(frozen=True, slots=True)
class PairMetrics:
    name: str
    m: int
    sd: float | None  # None when undefined (m <= 1)
    sd_clamped: float | None
    nhd: float | None
    ea: float


def compare_pair(name: str, ref: SemanticDag, pred: SemanticDag, use_aliases: bool = False) -> PairMetrics:
    al = align_nodes(ref, pred, use_aliases=use_aliases)
    try:
        diff = structural_difference(al)
        sd, sd_clamped, nhd = diff.sd, diff.sd_clamped, diff.nhd
    except UndefinedStructureError:
        sd = sd_clamped = nhd = None
    return PairMetrics(name=name, m=al.m, sd=sd, sd_clamped=sd_clamped, nhd=nhd, ea=evidence_alignment(ref, pred, al))


@dataclass(frozen=True, slots=True)
class MetricReport:
    pairs: tuple[PairMetrics, ...]
    predicted: int
    true_dags: int
    kept: int

    @property
    def dc(self) -> float:
        return dag_classification_precision(self.predicted, self.true_dags)

    @property
    def e2e(self) -> float:
        return end_to_end(self.kept, self.predicted)

    @property
    def sd_mean(self) -> float | None:
        values = [p.sd for p in self.pairs if p.sd is not None]
        return sum(values) / len(values) if values else None

    @property
    def ea_mean(self) -> float | None:
        values = [p.ea for p in self.pairs]
        return sum(values) / len(values) if values else None

    @property
    def undefined_structure(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.pairs if p.sd is None)

    def to_dict(self) -> dict:
        return {
            "counts": {"predicted": self.predicted, "true_dag": self.true_dags, "kept": self.kept},
            "dc": self.dc,
            "e2e": self.e2e,
            "sd_mean": self.sd_mean,
            "ea_mean": self.ea_mean,
            "undefined_structure": list(self.undefined_structure),
            "pairs": [
                {
                    "name": p.name,
                    "m": p.m,
                    "sd": p.sd,
                    "sd_clamped": p.sd_clamped,
                    "nhd": p.nhd,
                    "ea": p.ea,
                }
                for p in self.pairs
            ],
        }


def render_metric_table(rows: Sequence[tuple[str, MetricReport]]) -> str:
    """Aligned text table mirroring the benchmark column order:
    Pred. | True DAG | DC | SD | EA | Kept | E2E."""
    name_width = max((len(name) for name, _ in rows), default=5)
    header = f"{'model':<{name_width}}  {'Pred.':>5}  {'True DAG':>8}  {'DC':>4}  {'SD':>4}  {'EA':>4}  {'Kept':>4}  {'E2E':>4}"
    lines = [header]
    for name, report in rows:
        sd = f"{100 * report.sd_mean:.0f}%" if report.sd_mean is not None else "-"
        ea = f"{100 * report.ea_mean:.0f}%" if report.ea_mean is not None else "-"
        lines.append(
            f"{name:<{name_width}}  {report.predicted:>5}  {report.true_dags:>8}  {100 * report.dc:>3.0f}%  {sd:>4}  {ea:>4}  {report.kept:>4}  {100 * report.e2e:>3.0f}%"
        )
    return "\n".join(lines)


@dataclass(frozen=True, slots=True)
class SummaryStats:
    """Population statistics (variance divides by n)."""

    mean: float
    variance: float
    minimum: int
    maximum: int
    n: int


def _summarize(values: Sequence[int]) -> SummaryStats:
    return SummaryStats(
        mean=sum(values) / len(values),
        variance=pvariance(values),
        minimum=min(values),
        maximum=max(values),
        n=len(values),
    )


def dataset_statistics(dags: Iterable[SemanticDag]) -> dict[str, dict[str, SummaryStats]]:
    """Per-source node/edge count summaries, keyed source -> {nodes, edges}."""
    by_source: dict[str, list[SemanticDag]] = {}
    for dag in dags:
        by_source.setdefault(dag.provenance.source_repo, []).append(dag)
    if not by_source:
        raise SemdagError("dataset_statistics needs a non-empty collection")
    return {
        source: {
            "nodes": _summarize([len(d.nodes) for d in group]),
            "edges": _summarize([len(d.edges) for d in group]),
        }
        for source, group in sorted(by_source.items())
    }


def domain_tag_counts(
    dags: Iterable[SemanticDag],
    excluded: Iterable[str] = DEFAULT_EXCLUDED_DOMAINS,
) -> tuple[tuple[str, int], ...]:
    """Domain tag frequencies, descending, with the general tags excluded."""
    excluded_fold = {e.casefold() for e in excluded}
    counter: Counter[str] = Counter()
    for dag in dags:
        for tag in dag.context.domains:
            if tag.casefold() not in excluded_fold:
                counter[tag] += 1
    return tuple(sorted(counter.items(), key=lambda kv: (-kv[1], kv[0])))
