"""Metadata filtering and the per-stage funnel ledger.

Collection narrows raw repository metadata in two passes: a cheap
case-insensitive keyword filter over title and abstract, then an LLM check
for applied-case-study papers. The funnel ledger accumulates per-source
instance counts for every pipeline stage and renders retention rates.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .document import PaperMetadata, metadata_from_dict
from .errors import FormatError, SchemaViolationError, SemdagError
from .gateway import ModelGateway, ModelProfile, ModelRequest

DEFAULT_FILTER_TERMS = ("causality", "interpretability", "graphical models")

FUNNEL_STAGES = (
    "metadata",
    "metadata_processed",
    "papers_downloaded",
    "papers_candidates",
    "figures_pre_classification",
    "figures_post_classification",
    "semdags_pre_validation",
    "semdags_validated",
)


@dataclass(frozen=True, slots=True)
class KeywordDecision:
    keep: bool
    hits: tuple[str, ...] = ()


def keyword_filter(meta: PaperMetadata, terms: Iterable[str] = DEFAULT_FILTER_TERMS) -> KeywordDecision:
    """Keep a paper iff any term matches title or abstract.

    Matching is case-insensitive on word boundaries with no stemming
    ("causal" does not match the term "causality"); multi-word terms match
    as contiguous phrases.
    """
    terms = tuple(terms)
    if not terms:
        raise ValueError("terms must be non-empty")
    haystack = f"{meta.title}\n{meta.abstract}"
    hits = []
    for term in terms:
        tokens = re.findall(r"\w+", term)
        if not tokens:
            continue
        # Multi-word terms match as a contiguous token phrase: any non-word
        # separator between the words is fine, but tokens never match inside
        # larger words ("causal" stays distinct from "causality").
        pattern = r"\b" + r"\W+".join(re.escape(tok) for tok in tokens) + r"\b"
        if re.search(pattern, haystack, flags=re.IGNORECASE):
            hits.append(term)
    return KeywordDecision(keep=bool(hits), hits=tuple(hits))


@dataclass(frozen=True, slots=True)
class MetadataDecision:
    candidate: bool
    reason: str | None = None
    request_key: str | None = None


def llm_metadata_filter(meta: PaperMetadata, gateway: ModelGateway, profile: ModelProfile) -> MetadataDecision:
    """LLM pass over title and abstract; precision-first on any ambiguity.

    Papers with no usable abstract are rejected without a model call;
    unparseable model output after the gateway's bounded retries becomes
    rejected(parse_failure).
    """
    if not meta.abstract.strip():
        return MetadataDecision(candidate=False, reason="insufficient_metadata")
    request = ModelRequest(
        prompt_asset_id="metadata_filter",
        text_parts=(f"paper_id: {meta.paper_id}", f"title: {meta.title}", f"abstract: {meta.abstract}"),
        expected_schema_id="metadata_filter.v1",
    )
    try:
        response = gateway.complete(profile, request)
    except SchemaViolationError:
        return MetadataDecision(candidate=False, reason="parse_failure")
    payload = response.parsed
    if payload.decision == "candidate":
        return MetadataDecision(candidate=True, request_key=response.request_key)
    return MetadataDecision(candidate=False, reason=payload.reason or "model_rejected", request_key=response.request_key)


# ---------------------------------------------------------------------------
# Funnel ledger


class FunnelLedger:
    """Per-source stage counts with a single-writer accumulator.

    Stage order is fixed by FUNNEL_STAGES; increments are atomic and merging
    two ledgers is associative and order-independent.
    """

    def __init__(self) -> None:
        self._counts: dict[str, dict[str, int]] = {}
        self._lock = threading.Lock()

    def record(self, source: str, stage: str, count: int = 1) -> None:
        if stage not in FUNNEL_STAGES:
            raise SemdagError(f"unknown funnel stage {stage!r}")
        if count < 0:
            raise SemdagError("funnel counts must be non-negative")
        with self._lock:
            per_source = self._counts.setdefault(source, {})
            per_source[stage] = per_source.get(stage, 0) + count

    def count(self, source: str, stage: str) -> int:
        return self._counts.get(source, {}).get(stage, 0)

    def sources(self) -> tuple[str, ...]:
        return tuple(sorted(self._counts))

    def merge(self, other: "FunnelLedger") -> "FunnelLedger":
        merged = FunnelLedger()
        for ledger in (self, other):
            for source, stages in ledger._counts.items():
                for stage, count in stages.items():
                    merged.record(source, stage, count)
        return merged

    def to_dict(self) -> dict:
        return {
            source: {stage: stages[stage] for stage in FUNNEL_STAGES if stage in stages}
            for source, stages in sorted(self._counts.items())
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FunnelLedger":
        ledger = cls()
        for source, stages in data.items():
            for stage, count in stages.items():
                ledger.record(source, stage, count)
        return ledger


def format_retention(count: int, total: int) -> str:
    """Retention percent at the precision used by the dataset funnel table:
    two decimals of percent, four decimals below 0.01%, integers bare."""
    pct = 100.0 * count / total
    if pct == int(pct):
        return f"{int(pct)}%"
    if pct < 0.01:
        return f"{pct:.4f}%"
    return f"{pct:.2f}%"


@dataclass(frozen=True, slots=True)
class FunnelRow:
    source: str
    stage: str
    count: int
    retention_pct: float
    retention_label: str


def funnel_report(ledger: FunnelLedger) -> tuple[FunnelRow, ...]:
    """Rows of (stage, count, retention vs. metadata total) per source.

    The metadata stage must have been recorded first for every source.
    """
    rows: list[FunnelRow] = []
    for source in ledger.sources():
        total = ledger.count(source, "metadata")
        if total <= 0:
            raise SemdagError(f"source {source!r} has no metadata stage recorded")
        for stage in FUNNEL_STAGES:
            count = ledger.count(source, stage)
            rows.append(
                FunnelRow(
                    source=source,
                    stage=stage,
                    count=count,
                    retention_pct=100.0 * count / total,
                    retention_label=format_retention(count, total),
                )
            )
    return tuple(rows)


def render_funnel_table(rows: Iterable[FunnelRow]) -> str:
    """Aligned text table, one line per (source, stage)."""
    rows = tuple(rows)
    stage_width = max((len(r.stage) for r in rows), default=5)
    source_width = max((len(r.source) for r in rows), default=6)
    lines = [f"{'source':<{source_width}}  {'stage':<{stage_width}}  {'count':>12}  retention"]
    for row in rows:
        lines.append(
            f"{row.source:<{source_width}}  {row.stage:<{stage_width}}  {row.count:>12,}  {row.retention_label}"
        )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Metadata records


def load_metadata_records(path: str | Path) -> Iterator[PaperMetadata]:
    """Read one metadata record per line (paper_id, title, abstract, source, date)."""
    path = Path(path)
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}: line {lineno}: {exc.msg}") from exc
            yield metadata_from_dict(obj, path=f"{path}:{lineno}")
