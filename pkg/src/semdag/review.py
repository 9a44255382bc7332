"""Two-stage human validation, the edit budget, and the LLM-as-a-judge.

Candidates move through a small state machine: a scope gate (is the figure
a valid, in-scope single DAG — failures are terminal) and a quality gate
(structure and evidence reviewed together, with at most five manual
edits). Persistence is an append-only event log per candidate; current
state is a fold of events, so the store is crash-safe and replayable.
"""

from __future__ import annotations

import enum
import json
import logging
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

from .core import EDIT_BUDGET, Edit, SemanticDag, apply_edit, edit_from_dict, edit_to_dict
from .errors import (
    BudgetExceededError,
    FamilyConflictError,
    InvalidTransitionError,
    SchemaViolationError,
    SemdagError,
    VersionConflictError,
)
from .gateway import ModelGateway, ModelProfile, ModelRequest
from .serialization import parse_semantic_dag, serialize_canonical

logger = logging.getLogger(__name__)

SCOPE_REJECT_REASONS = (
    "multiple_dags",
    "temporal",
    "cyclic",
    "mixed_edge_semantics",
    "not_a_graph",
    "dag_like_other",
)


class CandidateStatus(str, enum.Enum):
    PENDING = "pending"
    REJECTED_SCOPE = "rejected_scope"
    REJECTED_QUALITY = "rejected_quality"
    APPROVED = "approved"
    APPROVED_WITH_EDITS = "approved_with_edits"


KEPT_STATUSES = (CandidateStatus.APPROVED, CandidateStatus.APPROVED_WITH_EDITS)


@dataclass(frozen=True, slots=True)
class CandidateState:
    """Fold of a candidate's event log."""

    candidate_id: str
    dag: SemanticDag
    status: CandidateStatus = CandidateStatus.PENDING
    scope_passed: bool = False
    edit_count: int = 0
    version: int = 0
    reject_reason: str | None = None
    meta: dict = field(default_factory=dict)

    @property
    def kept(self) -> bool:
        return self.status in KEPT_STATUSES

    @property
    def terminal(self) -> bool:
        return self.status is not CandidateStatus.PENDING


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _event(event_type: str, actor: str, **payload) -> dict:
    return {"type": event_type, "actor": actor, "ts": _now(), **payload}


# ---------------------------------------------------------------------------
# Transitions: each returns the event(s) to append, given the current state.


def gate_scope(state: CandidateState, decision: str, actor: str, reason: str | None = None) -> dict:
    """Gate 1: in_scope proceeds to the quality gate, out_of_scope is terminal."""
    if state.status is not CandidateStatus.PENDING or state.scope_passed:
        raise InvalidTransitionError(
            f"scope decision not allowed: candidate {state.candidate_id!r} is {state.status.value}"
            + (" (scope already decided)" if state.scope_passed else "")
        )
    if decision == "in_scope":
        return _event("scope", actor, decision="in_scope")
    if decision == "out_of_scope":
        return _event("scope", actor, decision="out_of_scope", reason=reason or "out_of_scope")
    raise InvalidTransitionError(f"unknown scope decision {decision!r}")


def gate_quality(
    state: CandidateState,
    action: str,
    actor: str,
    reason: str | None = None,
    edit: Edit | None = None,
) -> list[dict]:
    """Gate 2: approve, reject, or apply one budgeted edit.

    An edit that would raise edit_count past the budget is refused with
    BudgetExceededError and the candidate becomes rejected_quality
    (over_budget) — the over-budget path is terminal. A structurally
    invalid edit raises from apply_edit and consumes no budget.
    """
    if state.status is not CandidateStatus.PENDING:
        raise InvalidTransitionError(
            f"quality action not allowed: candidate {state.candidate_id!r} is {state.status.value}"
        )
    if not state.scope_passed:
        raise InvalidTransitionError(
            f"quality action not allowed: candidate {state.candidate_id!r} has not passed the scope gate"
        )
    if action == "approve":
        return [_event("quality", actor, action="approve")]
    if action == "reject":
        return [_event("quality", actor, action="reject", reason=reason or "quality")]
    if action == "edit":
        if edit is None:
            raise InvalidTransitionError("edit action requires an edit operation")
        if state.edit_count >= EDIT_BUDGET:
            raise BudgetExceededError(
                f"candidate {state.candidate_id!r} already has {state.edit_count} applied edits; budget is {EDIT_BUDGET}"
            )
        apply_edit(state.dag, edit)  # raises EditError / UnknownElementError; no budget consumed
        return [_event("edit", actor, edit=edit_to_dict(edit))]
    raise InvalidTransitionError(f"unknown quality action {action!r}")


def fold_step(state: CandidateState, event: dict) -> CandidateState:
    """Apply one event to a candidate state (version always advances)."""
    etype = event["type"]
    if etype == "created":
        pass
    elif etype == "scope":
        if event["decision"] == "in_scope":
            state = replace(state, scope_passed=True)
        else:
            state = replace(state, status=CandidateStatus.REJECTED_SCOPE, reject_reason=event.get("reason"))
    elif etype == "quality":
        if event["action"] == "approve":
            status = CandidateStatus.APPROVED if state.edit_count == 0 else CandidateStatus.APPROVED_WITH_EDITS
            state = replace(state, status=status)
        else:
            state = replace(state, status=CandidateStatus.REJECTED_QUALITY, reject_reason=event.get("reason"))
    elif etype == "edit":
        new_dag = apply_edit(state.dag, edit_from_dict(event["edit"]))
        state = replace(state, dag=new_dag, edit_count=state.edit_count + 1)
    elif etype == "judge":
        pass  # verdict bookkeeping; status changes arrive as scope/quality events
    else:
        raise SemdagError(f"unknown event type {etype!r}")
    return replace(state, version=state.version + 1)


def fold_events(candidate_id: str, initial_dag: SemanticDag, events: Iterable[dict], meta: dict | None = None) -> CandidateState:
    """Replay an event log into the current candidate state."""
    state = CandidateState(candidate_id=candidate_id, dag=initial_dag, meta=meta or {})
    for event in events:
        state = fold_step(state, event)
    return state


# ---------------------------------------------------------------------------
# Persistent candidate store


class CandidateStore:
    """Directory-backed store: per candidate a canonical dag file, a sidecar
    meta record, and an append-only event log. Single writer per candidate,
    serialized with per-candidate locks; remote writers use optimistic
    version checks."""

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def _lock(self, candidate_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(candidate_id, threading.Lock())

    def _dir(self, candidate_id: str) -> Path:
        return self.root / candidate_id

    def candidate_ids(self) -> tuple[str, ...]:
        if not self.root.exists():
            return ()
        return tuple(sorted(p.name for p in self.root.iterdir() if (p / "dag.json").exists()))

    def exists(self, candidate_id: str) -> bool:
        return (self._dir(candidate_id) / "dag.json").exists()

    def create(self, candidate_id: str, dag: SemanticDag, meta: dict | None = None, actor: str = "pipeline") -> CandidateState:
        directory = self._dir(candidate_id)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "dag.json").write_bytes(serialize_canonical(dag))
        (directory / "meta.json").write_text(
            json.dumps(meta or {}, ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        self._append(candidate_id, _event("created", actor, status="pre_validation"))
        return self.load(candidate_id)

    def _events_path(self, candidate_id: str) -> Path:
        return self._dir(candidate_id) / "events.jsonl"

    def _append(self, candidate_id: str, event: dict) -> None:
        path = self._events_path(candidate_id)
        with path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(event, ensure_ascii=False, sort_keys=True) + "\n")

    def events(self, candidate_id: str) -> list[dict]:
        path = self._events_path(candidate_id)
        if not path.exists():
            return []
        return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]

    def load(self, candidate_id: str) -> CandidateState:
        directory = self._dir(candidate_id)
        if not (directory / "dag.json").exists():
            raise SemdagError(f"unknown candidate {candidate_id!r}")
        dag = parse_semantic_dag((directory / "dag.json").read_bytes())
        meta = json.loads((directory / "meta.json").read_text(encoding="utf-8")) if (directory / "meta.json").exists() else {}
        return fold_events(candidate_id, dag, self.events(candidate_id), meta)

    def apply(
        self,
        candidate_id: str,
        events: list[dict],
        expected_version: int | None = None,
    ) -> CandidateState:
        """Append events atomically under the candidate's writer lock.

        With expected_version set, a stale version raises
        VersionConflictError before anything is written.
        """
        with self._lock(candidate_id):
            state = self.load(candidate_id)
            if expected_version is not None and state.version != expected_version:
                raise VersionConflictError(
                    f"candidate {candidate_id!r} is at version {state.version}, client expected {expected_version}"
                )
            for event in events:
                self._append(candidate_id, event)
            return self.load(candidate_id)

    def scope_decision(self, candidate_id: str, decision: str, actor: str, reason: str | None = None, expected_version: int | None = None) -> CandidateState:
        with self._lock(candidate_id):
            state = self.load(candidate_id)
            if expected_version is not None and state.version != expected_version:
                raise VersionConflictError(
                    f"candidate {candidate_id!r} is at version {state.version}, client expected {expected_version}"
                )
            event = gate_scope(state, decision, actor, reason)
            self._append(candidate_id, event)
            return self.load(candidate_id)

    def quality_action(
        self,
        candidate_id: str,
        action: str,
        actor: str,
        reason: str | None = None,
        edit: Edit | None = None,
        expected_version: int | None = None,
    ) -> CandidateState:
        with self._lock(candidate_id):
            state = self.load(candidate_id)
            if expected_version is not None and state.version != expected_version:
                raise VersionConflictError(
                    f"candidate {candidate_id!r} is at version {state.version}, client expected {expected_version}"
                )
            try:
                events = gate_quality(state, action, actor, reason=reason, edit=edit)
            except BudgetExceededError:
                # The refusal is auditable and terminal: the candidate drops
                # to rejected_quality(over_budget) before the error surfaces.
                self._append(candidate_id, _event("quality", actor, action="reject", reason="over_budget"))
                raise
            for event in events:
                self._append(candidate_id, event)
            return self.load(candidate_id)


# ---------------------------------------------------------------------------
# LLM-as-a-judge


@dataclass(frozen=True, slots=True)
class AnnotatorDecision:
    profile_name: str
    family: str
    decision: str  # accept | reject
    reason: str | None
    rationale: str


@dataclass(frozen=True, slots=True)
class JudgeVerdict:
    candidate_id: str
    annotator_decisions: tuple[AnnotatorDecision, ...]
    judge_profile: str
    final: str  # accept | reject
    reason: str | None
    rationale: str

    def to_dict(self) -> dict:
        return {
            "candidate_id": self.candidate_id,
            "annotators": [
                {
                    "profile": a.profile_name,
                    "family": a.family,
                    "decision": a.decision,
                    "reason": a.reason,
                    "rationale": a.rationale,
                }
                for a in self.annotator_decisions
            ],
            "judge_profile": self.judge_profile,
            "final": self.final,
            "reason": self.reason,
            "rationale": self.rationale,
        }


def check_family_constraint(annotators: Iterable[ModelProfile], judge: ModelProfile) -> None:
    """The judge must come from a different family than every annotator."""
    for annotator in annotators:
        if annotator.family == judge.family:
            raise FamilyConflictError(
                f"judge {judge.name!r} shares family {judge.family!r} with annotator {annotator.name!r}"
            )


def _candidate_presentation(state: CandidateState, evidence_texts: dict[str, str]) -> str:
    lines = [serialize_canonical(state.dag).decode("utf-8"), "", "Cited passages:"]
    for block_id in sorted(evidence_texts):
        lines.append(f"[{block_id}] {evidence_texts[block_id]}")
    return "\n".join(lines)


def llm_judge(
    state: CandidateState,
    annotator_profiles: tuple[ModelProfile, ModelProfile, ModelProfile],
    judge_profile: ModelProfile,
    gateway: ModelGateway,
    evidence_texts: dict[str, str] | None = None,
) -> JudgeVerdict:
    """Three independent annotator reviews, then one judge verdict.

    The family constraint is checked before any model call. A judge output
    that fails schema validation becomes a conservative final reject
    (parse_failure); annotator parse failures are recorded as rejects for
    the same reason.
    """
    annotator_profiles = tuple(annotator_profiles)
    if len(annotator_profiles) != 3:
        raise SemdagError(f"exactly 3 annotator profiles required, got {len(annotator_profiles)}")
    check_family_constraint(annotator_profiles, judge_profile)

    presentation = _candidate_presentation(state, evidence_texts or {})
    decisions: list[AnnotatorDecision] = []
    for profile in annotator_profiles:
        request = ModelRequest(
            prompt_asset_id="judge_annotator",
            text_parts=(f"candidate_id: {state.candidate_id}", presentation),
            expected_schema_id="judge_annotator.v1",
        )
        try:
            response = gateway.complete(profile, request)
            payload = response.parsed
            decisions.append(
                AnnotatorDecision(
                    profile_name=profile.name,
                    family=profile.family,
                    decision=payload.decision,
                    reason=payload.reason,
                    rationale=payload.rationale,
                )
            )
        except SchemaViolationError as exc:
            decisions.append(
                AnnotatorDecision(
                    profile_name=profile.name,
                    family=profile.family,
                    decision="reject",
                    reason="parse_failure",
                    rationale=str(exc),
                )
            )

    summary = "\n".join(
        f"Annotator {a.profile_name} ({a.family}): {a.decision}"
        + (f" — reason: {a.reason}" if a.reason else "")
        + (f" — rationale: {a.rationale}" if a.rationale else "")
        for a in decisions
    )
    judge_request = ModelRequest(
        prompt_asset_id="judge_final",
        text_parts=(f"candidate_id: {state.candidate_id}", presentation, "Annotator decisions:\n" + summary),
        expected_schema_id="judge_final.v1",
    )
    try:
        response = gateway.complete(judge_profile, judge_request)
        payload = response.parsed
        final, reason, rationale = payload.final, payload.reason, payload.rationale
    except SchemaViolationError as exc:
        final, reason, rationale = "reject", "parse_failure", str(exc)

    return JudgeVerdict(
        candidate_id=state.candidate_id,
        annotator_decisions=tuple(decisions),
        judge_profile=judge_profile.name,
        final=final,
        reason=reason,
        rationale=rationale,
    )


def apply_judge_verdict(store: CandidateStore, verdict: JudgeVerdict) -> CandidateState:
    """Record the verdict and the resulting status transition in the audit log.

    Accept → scope pass + quality approve under the judge actor. Reject →
    scope reject when the reason matches the scope taxonomy, quality reject
    otherwise.
    """
    actor = f"llm_judge:{verdict.judge_profile}"
    events = [_event("judge", actor, verdict=verdict.to_dict())]
    if verdict.final == "accept":
        events.append(_event("scope", actor, decision="in_scope"))
        events.append(_event("quality", actor, action="approve"))
    elif verdict.reason in SCOPE_REJECT_REASONS:
        events.append(_event("scope", actor, decision="out_of_scope", reason=verdict.reason))
    else:
        events.append(_event("scope", actor, decision="in_scope"))
        events.append(_event("quality", actor, action="reject", reason=verdict.reason or "judge_reject"))
    return store.apply(verdict.candidate_id, events)
