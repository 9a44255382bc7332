"""Resumable end-to-end pipeline: collect → ingest → filter → classify →
annotate → judge (optional) → export.

Each stage appends one record per item to its own log, keyed by the item's
input content hash and the stage version; re-runs skip items whose key
already succeeded, so an interrupted run resumed over the same replay
store produces byte-identical outputs and never repeats a model-call key.
The funnel, kept set, and export bundle are derived from the persisted
logs, which makes them crash-safe and deterministic.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

import yaml

from . import annotate as annotate_mod
from . import classify as classify_mod
from .collection import (
    DEFAULT_FILTER_TERMS,
    FunnelLedger,
    funnel_report,
    keyword_filter,
    llm_metadata_filter,
    load_metadata_records,
    render_funnel_table,
)
from .document import DEFAULT_CHUNK_MAX_CHARS, ParsedDocument, ingest_parsed_document
from .errors import ConfigError, FamilyConflictError, FormatError, SchemaError, SemdagError, StageError
from .export import export_graphs, render_data_card
from .gateway import ModelGateway, ModelProfile, PromptLibrary, ReplayStore, load_profiles
from .metrics import dataset_statistics, domain_tag_counts
from .review import CandidateStore, InvalidTransitionError, apply_judge_verdict, check_family_constraint, llm_judge

logger = logging.getLogger(__name__)

STAGE_ORDER = ("collect", "ingest", "filter", "classify", "annotate", "judge", "export")
STAGE_VERSION = 1


@dataclass
class PipelineConfig:
    run_dir: Path
    metadata_path: Path
    documents_dir: Path
    corpus_root: Path
    profiles: dict[str, ModelProfile]
    stage_profiles: dict[str, str]
    gateway_mode: str = "replay"
    replay_dir: Path | None = None
    terms: tuple[str, ...] = DEFAULT_FILTER_TERMS
    source: str | None = None
    limit: int | None = None
    chunk_max_chars: int = DEFAULT_CHUNK_MAX_CHARS
    context_budget_chars: int = annotate_mod.DEFAULT_CONTEXT_BUDGET_CHARS
    workers: int = 1
    seed: int = 0
    max_attempts: int = 3
    backoff_base_s: float = 0.5
    judge_enabled: bool = False
    judge_annotators: tuple[str, ...] = ()
    judge_profile: str | None = None
    prompt_overrides: Path | None = None

    def profile(self, stage: str) -> ModelProfile:
        name = self.stage_profiles.get(stage)
        if name is None:
            raise ConfigError(f"no profile configured for stage {stage!r}")
        return self.profiles[name]


def _resolve(base: Path, value: str | None) -> Path | None:
    if value is None:
        return None
    path = Path(value)
    return path if path.is_absolute() else (base / path)


def load_config(path: str | Path) -> PipelineConfig:
    """Parse and validate the pipeline config; raises ConfigError before any work."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    base = path.parent

    try:
        corpus = raw.get("corpus", {})
        profiles = load_profiles(raw.get("profiles", []))
        gateway_cfg = raw.get("gateway", {})
        judge_cfg = raw.get("judge", {}) or {}
        config = PipelineConfig(
            run_dir=_resolve(base, raw["run_dir"]),
            metadata_path=_resolve(base, corpus["metadata"]),
            documents_dir=_resolve(base, corpus["documents"]),
            corpus_root=_resolve(base, corpus.get("corpus_root", ".")),
            profiles=profiles,
            stage_profiles=dict(raw.get("stages", {})),
            gateway_mode=gateway_cfg.get("mode", "replay"),
            replay_dir=_resolve(base, gateway_cfg.get("replay_dir")),
            terms=tuple(raw.get("terms", DEFAULT_FILTER_TERMS)),
            source=raw.get("source"),
            limit=raw.get("limit"),
            chunk_max_chars=int(raw.get("chunk_max_chars", DEFAULT_CHUNK_MAX_CHARS)),
            context_budget_chars=int(raw.get("context_budget_chars", annotate_mod.DEFAULT_CONTEXT_BUDGET_CHARS)),
            workers=int(raw.get("workers", 1)),
            seed=int(raw.get("seed", 0)),
            max_attempts=int(gateway_cfg.get("max_attempts", 3)),
            backoff_base_s=float(gateway_cfg.get("backoff_base_s", 0.5)),
            judge_enabled=bool(judge_cfg.get("enabled", False)),
            judge_annotators=tuple(judge_cfg.get("annotators", ())),
            judge_profile=judge_cfg.get("judge"),
            prompt_overrides=_resolve(base, raw.get("prompt_overrides")),
        )
    except (KeyError, TypeError, ValueError, SemdagError) as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from exc

    validate_config(config)
    return config


def validate_config(config: PipelineConfig) -> None:
    if config.gateway_mode not in ("replay", "record", "live"):
        raise ConfigError(f"unknown gateway mode {config.gateway_mode!r}")
    if config.gateway_mode in ("replay", "record") and config.replay_dir is None:
        raise ConfigError(f"{config.gateway_mode} mode requires gateway.replay_dir")
    if not config.terms:
        raise ConfigError("terms must be non-empty")
    if not config.metadata_path.exists():
        raise ConfigError(f"metadata file {config.metadata_path} does not exist")
    if not config.documents_dir.exists():
        raise ConfigError(f"documents directory {config.documents_dir} does not exist")
    for stage in ("filter", "classify", "annotate", "enrich"):
        name = config.stage_profiles.get(stage)
        if name is None:
            raise ConfigError(f"stages.{stage} must name a profile")
        if name not in config.profiles:
            raise ConfigError(f"stages.{stage} references unknown profile {name!r}")
    for stage in ("classify", "annotate"):
        if "vision" not in config.profiles[config.stage_profiles[stage]].capabilities:
            raise ConfigError(f"stage {stage!r} requires a vision-capable profile")
    if config.judge_enabled:
        if len(config.judge_annotators) != 3:
            raise ConfigError("judge.annotators must name exactly 3 profiles")
        if config.judge_profile is None:
            raise ConfigError("judge.judge must name a profile")
        for name in (*config.judge_annotators, config.judge_profile):
            if name not in config.profiles:
                raise ConfigError(f"judge references unknown profile {name!r}")
        try:
            check_family_constraint(
                [config.profiles[n] for n in config.judge_annotators],
                config.profiles[config.judge_profile],
            )
        except FamilyConflictError as exc:
            raise ConfigError(str(exc)) from exc
    if config.workers < 1:
        raise ConfigError("workers must be >= 1")


def build_gateway(config: PipelineConfig, backend=None) -> ModelGateway:
    store = ReplayStore(config.replay_dir) if config.replay_dir is not None else None
    return ModelGateway(
        mode=config.gateway_mode,  # type: ignore[arg-type]
        backend=backend,
        store=store,
        prompts=PromptLibrary(config.prompt_overrides),
        max_attempts=config.max_attempts,
        backoff_base_s=config.backoff_base_s,
    )


# ---------------------------------------------------------------------------
# Stage log: append-only JSONL, the resume source of truth.


class StageLog:
    """One JSONL file per stage; an item is done when its last record
    matches the current input hash and stage version."""

    def __init__(self, path: Path) -> None:
        self.path = path
        self._records: dict[str, dict] = {}
        if path.exists():
            for line in path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    record = json.loads(line)
                    self._records[record["item"]] = record

    def done(self, item: str, input_hash: str) -> bool:
        record = self._records.get(item)
        return (
            record is not None
            and record.get("input_hash") == input_hash
            and record.get("stage_version") == STAGE_VERSION
        )

    def get(self, item: str) -> dict | None:
        return self._records.get(item)

    def records(self) -> list[dict]:
        return list(self._records.values())

    def append(self, item: str, input_hash: str, payload: dict) -> dict:
        record = {"item": item, "input_hash": input_hash, "stage_version": STAGE_VERSION, **payload}
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
        self._records[item] = record
        return record


def _hash_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _hash_path(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _run_items(
    work: list[tuple[str, Callable[[], Any]]],
    workers: int,
) -> list[tuple[str, Any | Exception]]:
    """Item-level bounded parallelism; results come back in input order so
    log appends (and therefore output bytes) stay deterministic."""
    if workers <= 1 or len(work) <= 1:
        results: list[tuple[str, Any | Exception]] = []
        for key, thunk in work:
            try:
                results.append((key, thunk()))
            except (SemdagError, StageError) as exc:
                results.append((key, exc))
        return results
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [(key, pool.submit(thunk)) for key, thunk in work]
        results = []
        for key, future in futures:
            try:
                results.append((key, future.result()))
            except (SemdagError, StageError) as exc:
                results.append((key, exc))
        return results


# ---------------------------------------------------------------------------
# Stages


@dataclass
class RunState:
    config: PipelineConfig
    gateway: ModelGateway
    run_dir: Path
    store: CandidateStore
    errors: list[str] = field(default_factory=list)

    def log(self, stage: str) -> StageLog:
        return StageLog(self.run_dir / f"{stage}.jsonl")


def _stage_collect(state: RunState) -> None:
    log = state.log("collect")
    count = 0
    for meta in load_metadata_records(state.config.metadata_path):
        if state.config.source is not None and meta.source_repo != state.config.source:
            continue
        count += 1
        if state.config.limit is not None and count > state.config.limit:
            break
        input_hash = _hash_text(f"{meta.paper_id}|{meta.title}|{meta.abstract}|{','.join(state.config.terms)}")
        if log.done(meta.paper_id, input_hash):
            continue
        decision = keyword_filter(meta, state.config.terms)
        log.append(
            meta.paper_id,
            input_hash,
            {"source": meta.source_repo, "keep": decision.keep, "hits": list(decision.hits)},
        )


def _stage_ingest(state: RunState) -> None:
    log = state.log("ingest")
    kept = [r for r in state.log("collect").records() if r["keep"]]
    for record in sorted(kept, key=lambda r: r["item"]):
        paper_id = record["item"]
        doc_path = state.config.documents_dir / f"{paper_id}.json"
        if not doc_path.exists():
            input_hash = _hash_text("missing")
            if not log.done(paper_id, input_hash):
                log.append(paper_id, input_hash, {"ok": False, "source": record["source"], "error": "document not available"})
            continue
        input_hash = _hash_path(doc_path)
        if log.done(paper_id, input_hash):
            continue
        try:
            ingest_parsed_document(doc_path, state.config.chunk_max_chars)
        except (FormatError, SchemaError) as exc:
            log.append(paper_id, input_hash, {"ok": False, "source": record["source"], "error": str(exc)})
            state.errors.append(f"ingest {paper_id}: {exc}")
            continue
        log.append(paper_id, input_hash, {"ok": True, "source": record["source"], "doc_rel": f"{paper_id}.json"})


def _load_document(state: RunState, paper_id: str) -> ParsedDocument:
    return ingest_parsed_document(state.config.documents_dir / f"{paper_id}.json", state.config.chunk_max_chars)


def _stage_filter(state: RunState) -> None:
    log = state.log("filter")
    profile = state.config.profile("filter")
    metadata = {m.paper_id: m for m in load_metadata_records(state.config.metadata_path)}
    ingested = [r for r in state.log("ingest").records() if r["ok"]]
    work = []
    hashes: dict[str, str] = {}
    sources: dict[str, str] = {}
    for record in sorted(ingested, key=lambda r: r["item"]):
        paper_id = record["item"]
        meta = metadata[paper_id]
        input_hash = _hash_text(f"{meta.title}|{meta.abstract}|{profile.name}")
        if log.done(paper_id, input_hash):
            continue
        hashes[paper_id] = input_hash
        sources[paper_id] = record["source"]
        work.append((paper_id, lambda meta=meta: llm_metadata_filter(meta, state.gateway, profile)))
    for paper_id, outcome in _run_items(work, state.config.workers):
        if isinstance(outcome, Exception):
            state.errors.append(f"filter {paper_id}: {outcome}")
            continue
        log.append(
            paper_id,
            hashes[paper_id],
            {"source": sources[paper_id], "candidate": outcome.candidate, "reason": outcome.reason},
        )


def _candidate_papers(state: RunState) -> list[str]:
    return sorted(r["item"] for r in state.log("filter").records() if r["candidate"])


def _stage_classify(state: RunState) -> None:
    log = state.log("classify")
    profile = state.config.profile("classify")
    work = []
    hashes: dict[str, str] = {}
    sources: dict[str, str] = {}
    for paper_id in _candidate_papers(state):
        doc = _load_document(state, paper_id)
        for figure in doc.figures:
            item = f"{paper_id}::{figure.figure_id}"
            input_hash = _hash_text(f"{figure.content_hash}|{profile.name}")
            if log.done(item, input_hash):
                continue
            hashes[item] = input_hash
            sources[item] = doc.metadata.source_repo
            work.append(
                (
                    item,
                    lambda figure=figure, paper_id=paper_id: classify_mod.classify_figure(
                        figure, paper_id, state.config.corpus_root, state.gateway, profile
                    ),
                )
            )
    for item, outcome in _run_items(work, state.config.workers):
        if isinstance(outcome, Exception):
            state.errors.append(f"classify {item}: {outcome}")
            continue
        log.append(item, hashes[item], {"source": sources[item], **outcome.to_dict()})


def _annotate_item(state: RunState, figure, doc) -> tuple[annotate_mod.AnnotationResult, Any, str | None]:
    """Worker body: annotate, then enrich on success. Pure of stage state."""
    result = annotate_mod.annotate_figure(
        figure, doc, state.config.corpus_root, state.gateway, state.config.profile("annotate"), state.config.context_budget_chars
    )
    if not result.accepted:
        return result, None, None
    context, enrich_key = annotate_mod.enrich_context(
        result.dag, doc, state.gateway, state.config.profile("enrich"), state.config.context_budget_chars
    )
    return result, context, enrich_key


def _stage_annotate(state: RunState) -> None:
    log = state.log("annotate")
    profile = state.config.profile("annotate")
    enrich_profile = state.config.profile("enrich")
    accepted = [r for r in state.log("classify").records() if r["verdict"] == "accept"]
    work = []
    context_by_item: dict[str, tuple] = {}
    for record in sorted(accepted, key=lambda r: r["item"]):
        paper_id, figure_id = record["item"].split("::", 1)
        doc = _load_document(state, paper_id)
        figure = next(f for f in doc.figures if f.figure_id == figure_id)
        item = record["item"]
        input_hash = _hash_text(f"{figure.content_hash}|{profile.name}|{enrich_profile.name}")
        if log.done(item, input_hash):
            continue
        context_by_item[item] = (paper_id, figure_id, figure, doc, input_hash)
        work.append((item, lambda figure=figure, doc=doc: _annotate_item(state, figure, doc)))

    for item, outcome in _run_items(work, state.config.workers):
        paper_id, figure_id, figure, doc, input_hash = context_by_item[item]
        if isinstance(outcome, Exception):
            state.errors.append(f"annotate {item}: {outcome}")
            continue
        result, context, enrich_key = outcome
        if not result.accepted:
            log.append(
                item,
                input_hash,
                {
                    "source": doc.metadata.source_repo,
                    "accepted": False,
                    "rejection": {"kind": result.rejection.kind, "detail": result.rejection.detail},
                    "request_keys": list(result.request_keys),
                },
            )
            continue
        dag = replace(result.dag, context=context)
        candidate_id = f"{paper_id}__{figure_id}"
        if not state.store.exists(candidate_id):
            state.store.create(
                candidate_id,
                dag,
                meta={
                    "paper_id": paper_id,
                    "figure_id": figure_id,
                    "doc_path": str(state.config.documents_dir / f"{paper_id}.json"),
                    "image_ref": str(state.config.corpus_root / figure.image_ref),
                    "request_keys": list(result.request_keys) + [enrich_key],
                    "status": "pre_validation",
                },
            )
        log.append(
            item,
            input_hash,
            {
                "source": doc.metadata.source_repo,
                "accepted": True,
                "candidate_id": candidate_id,
                "request_keys": list(result.request_keys) + [enrich_key],
            },
        )


def _stage_judge(state: RunState) -> None:
    if not state.config.judge_enabled:
        return
    log = state.log("judge")
    annotators = tuple(state.config.profiles[n] for n in state.config.judge_annotators)
    judge_profile = state.config.profiles[state.config.judge_profile]
    for candidate_id in state.store.candidate_ids():
        candidate = state.store.load(candidate_id)
        input_hash = _hash_text(
            (state.run_dir / "candidates" / candidate_id / "dag.json").read_text(encoding="utf-8")
            + "|".join(p.name for p in annotators)
            + judge_profile.name
        )
        if log.done(candidate_id, input_hash):
            continue
        if candidate.terminal:
            log.append(candidate_id, input_hash, {"skipped": "already decided", "final": None})
            continue
        doc = _load_document(state, candidate.meta["paper_id"])
        block_map = doc.block_map()
        cited = sorted(
            {ref for node in candidate.dag.nodes for ref in node.evidence}
            | {ref for edge in candidate.dag.edges for ref in edge.evidence}
        )
        evidence_texts = {ref: block_map[ref].text for ref in cited if ref in block_map}
        try:
            verdict = llm_judge(candidate, annotators, judge_profile, state.gateway, evidence_texts)
        except SemdagError as exc:
            state.errors.append(f"judge {candidate_id}: {exc}")
            continue
        try:
            apply_judge_verdict(state.store, verdict)
        except InvalidTransitionError:
            logger.warning("verdict for %s arrived after a terminal decision; keeping existing state", candidate_id)
        log.append(candidate_id, input_hash, {"final": verdict.final, "reason": verdict.reason, "verdict": verdict.to_dict()})


def build_funnel(state: RunState) -> FunnelLedger:
    """Derive the funnel from persisted logs; deterministic across resumes."""
    ledger = FunnelLedger()
    count = 0
    for meta in load_metadata_records(state.config.metadata_path):
        if state.config.source is not None and meta.source_repo != state.config.source:
            continue
        count += 1
        if state.config.limit is not None and count > state.config.limit:
            break
        ledger.record(meta.source_repo, "metadata")
    for record in state.log("collect").records():
        if record["keep"]:
            ledger.record(record["source"], "metadata_processed")
    for record in state.log("ingest").records():
        if record["ok"]:
            ledger.record(record["source"], "papers_downloaded")
    for record in state.log("filter").records():
        if record["candidate"]:
            ledger.record(record["source"], "papers_candidates")
    for record in state.log("classify").records():
        ledger.record(record["source"], "figures_pre_classification")
        if record["verdict"] == "accept":
            ledger.record(record["source"], "figures_post_classification")
    for record in state.log("annotate").records():
        if record["accepted"]:
            ledger.record(record["source"], "semdags_pre_validation")
    for candidate_id in state.store.candidate_ids():
        candidate = state.store.load(candidate_id)
        if candidate.kept:
            ledger.record(candidate.dag.provenance.source_repo, "semdags_validated")
    return ledger


def _stage_export(state: RunState) -> dict:
    kept_states = [
        state.store.load(cid) for cid in state.store.candidate_ids() if state.store.load(cid).kept
    ]
    kept_ids = sorted(s.candidate_id for s in kept_states)
    (state.run_dir / "kept.json").write_text(
        json.dumps({"kept": kept_ids}, ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    ledger = build_funnel(state)
    rows = funnel_report(ledger)
    (state.run_dir / "funnel.json").write_text(
        json.dumps(ledger.to_dict(), ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (state.run_dir / "funnel.txt").write_text(render_funnel_table(rows) + "\n", encoding="utf-8")

    manifest: dict = {"counts": {}, "total": 0, "files": {}, "schema_version": "1"}
    if kept_states:
        manifest = export_graphs((s.dag for s in kept_states), state.run_dir / "export")
        dags = [s.dag for s in kept_states]
        card = render_data_card(dataset_statistics(dags), domain_tag_counts(dags), rows)
        (state.run_dir / "export" / "datacard.md").write_text(card, encoding="utf-8")
    return manifest


_STAGES: dict[str, Callable[[RunState], Any]] = {
    "collect": _stage_collect,
    "ingest": _stage_ingest,
    "filter": _stage_filter,
    "classify": _stage_classify,
    "annotate": _stage_annotate,
    "judge": _stage_judge,
    "export": _stage_export,
}


def run_pipeline(
    config: PipelineConfig,
    backend=None,
    stop_after: str | None = None,
    dry_run: bool = False,
) -> dict:
    """Execute the staged pipeline; returns the run summary.

    ``stop_after`` ends the run after the named stage (used for interrupt /
    resume testing and stage-at-a-time operation); a later invocation picks
    up where the log left off.
    """
    if stop_after is not None and stop_after not in STAGE_ORDER:
        raise ConfigError(f"unknown stage {stop_after!r}")
    if dry_run:
        return {"planned_stages": list(STAGE_ORDER), "run_dir": str(config.run_dir), "seed": config.seed}

    config.run_dir.mkdir(parents=True, exist_ok=True)
    state = RunState(
        config=config,
        gateway=build_gateway(config, backend),
        run_dir=config.run_dir,
        store=CandidateStore(config.run_dir / "candidates"),
    )
    manifest: dict = {}
    for stage in STAGE_ORDER:
        logger.info("running stage %s", stage)
        result = _STAGES[stage](state)
        if stage == "export":
            manifest = result or {}
        if stop_after == stage:
            break

    summary = {
        "run_dir": str(config.run_dir),
        "seed": config.seed,
        "stages_completed": list(STAGE_ORDER[: STAGE_ORDER.index(stop_after) + 1]) if stop_after else list(STAGE_ORDER),
        "gateway_requests": len(state.gateway.request_log),
        "errors": state.errors,
        "export": manifest,
    }
    (config.run_dir / "summary.json").write_text(
        json.dumps(summary, ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return summary
