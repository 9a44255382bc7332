"""Uniform model-backend access with structured output and record/replay.

Every model call goes through ModelGateway.complete(): capability checks,
bounded retries with exponential backoff, optional token-bucket rate
limiting, strict structured-output extraction, and a deterministic
record/replay store keyed by a stable hash of the request content.
Replay mode is hermetic — it never touches a backend.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Literal, Protocol

import httpx
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import (
    CapabilityMismatchError,
    ReplayMissError,
    SchemaViolationError,
    SemdagError,
    TransportError,
)

logger = logging.getLogger(__name__)

DEFAULT_MAX_ATTEMPTS = 3
PROMPT_ASSET_DIR = Path(__file__).parent / "prompt_assets"


@dataclass(frozen=True, slots=True)
class ModelProfile:
    """One configured backend model: name, vendor family, capabilities."""

    name: str
    family: str
    capabilities: frozenset[str] = frozenset({"text"})
    endpoint_url: str | None = None
    auth_env: str | None = None

    def __post_init__(self) -> None:
        if not self.family:
            raise SemdagError(f"profile {self.name!r} must declare a model family")


@dataclass(frozen=True, slots=True)
class ModelRequest:
    prompt_asset_id: str
    text_parts: tuple[str, ...] = ()
    image_parts: tuple[str, ...] = ()
    expected_schema_id: str | None = None
    deterministic: bool = True


@dataclass(frozen=True, slots=True)
class ModelResponse:
    raw_text: str
    parsed: Any | None
    request_key: str
    profile_name: str
    attempts: int
    latency_s: float = 0.0


def hash_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def request_key(profile: ModelProfile, request: ModelRequest, image_hashes: tuple[str, ...]) -> str:
    """Stable replay key over (profile name, prompt asset, text, image hashes)."""
    payload = json.dumps(
        {
            "profile": profile.name,
            "prompt_asset_id": request.prompt_asset_id,
            "text_parts": list(request.text_parts),
            "image_hashes": list(image_hashes),
        },
        ensure_ascii=False,
        separators=(",", ":"),
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Structured-output schemas

_REJECT_REASONS = (
    "multiple_dags",
    "temporal",
    "cyclic",
    "mixed_edge_semantics",
    "not_a_graph",
    "dag_like_other",
)


class _StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MetadataFilterPayload(_StrictModel):
    decision: Literal["candidate", "rejected"]
    reason: str | None = None


class ClassificationPayload(_StrictModel):
    verdict: Literal["accept", "reject", "abstain"]
    reason: Literal[_REJECT_REASONS] | None = None  # type: ignore[valid-type]

    @model_validator(mode="after")
    def _reason_iff_reject(self) -> "ClassificationPayload":
        if self.verdict == "reject" and self.reason is None:
            raise ValueError("reject verdict requires a reason")
        if self.verdict == "accept" and self.reason is not None:
            raise ValueError("accept verdict must not carry a reason")
        return self


class AnnotationNodePayload(_StrictModel):
    id: str = Field(min_length=1)
    label: str = Field(min_length=1)
    aliases: list[str] = Field(default_factory=list)
    description: str = ""
    evidence: list[str] = Field(default_factory=list)


class AnnotationEdgePayload(_StrictModel):
    source: str = Field(min_length=1)
    target: str = Field(min_length=1)
    description: str = ""
    evidence: list[str] = Field(default_factory=list)


class AnnotationPayload(_StrictModel):
    is_dag: bool
    category: str = ""
    abstract: bool = False
    nodes: list[AnnotationNodePayload] = Field(default_factory=list)
    edges: list[AnnotationEdgePayload] = Field(default_factory=list)


class EnrichmentPayload(_StrictModel):
    theme: str = Field(min_length=1)
    domains: list[str] = Field(min_length=1)
    nature: Literal["technical", "abstract"]


class AnnotatorVerdictPayload(_StrictModel):
    decision: Literal["accept", "reject"]
    reason: str | None = None
    rationale: str = ""


class JudgeFinalPayload(_StrictModel):
    final: Literal["accept", "reject"]
    reason: str | None = None
    rationale: str = ""


SCHEMA_REGISTRY: dict[str, type[BaseModel]] = {
    "metadata_filter.v1": MetadataFilterPayload,
    "dag_classification.v1": ClassificationPayload,
    "dag_annotation.v1": AnnotationPayload,
    "context_enrichment.v1": EnrichmentPayload,
    "judge_annotator.v1": AnnotatorVerdictPayload,
    "judge_final.v1": JudgeFinalPayload,
}

_FENCE_RE = re.compile(r"```(?:json)?\s*\n(.*?)\n\s*```", re.DOTALL)


def strip_fences(text: str) -> str:
    """Pull the payload out of a markdown code fence, if any."""
    match = _FENCE_RE.search(text)
    if match:
        return match.group(1)
    return text


def extract_structured(raw_text: str, schema_id: str) -> BaseModel:
    """Strictly validate model output against a registered schema.

    The only repairs applied are code-fence stripping and tolerance for
    leading/trailing prose around a single JSON object; no speculative
    bracket fixing.
    """
    if schema_id not in SCHEMA_REGISTRY:
        raise SemdagError(f"schema {schema_id!r} is not registered")
    model = SCHEMA_REGISTRY[schema_id]
    text = strip_fences(raw_text).strip()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        start, end = text.find("{"), text.rfind("}")
        if start == -1 or end <= start:
            raise SchemaViolationError(schema_id, "$", "no JSON object found in output")
        try:
            obj = json.loads(text[start : end + 1])
        except json.JSONDecodeError as exc:
            raise SchemaViolationError(schema_id, "$", f"invalid JSON: {exc}") from exc
    try:
        return model.model_validate(obj)
    except ValidationError as exc:
        first = exc.errors()[0]
        path = "$" + "".join(f".{loc}" if isinstance(loc, str) else f"[{loc}]" for loc in first["loc"])
        raise SchemaViolationError(schema_id, path, first["msg"]) from exc


# ---------------------------------------------------------------------------
# Prompt assets


class PromptLibrary:
    """Plain-text prompt assets keyed by id, with optional overrides."""

    def __init__(self, override_dir: str | Path | None = None) -> None:
        self._override_dir = Path(override_dir) if override_dir else None

    def get(self, asset_id: str) -> str:
        filename = f"{asset_id}.txt"
        if self._override_dir is not None:
            candidate = self._override_dir / filename
            if candidate.exists():
                return candidate.read_text(encoding="utf-8")
        packaged = PROMPT_ASSET_DIR / filename
        if not packaged.exists():
            raise SemdagError(f"unknown prompt asset {asset_id!r}")
        return packaged.read_text(encoding="utf-8")


# ---------------------------------------------------------------------------
# Backends and the replay store


class Backend(Protocol):
    def send(self, profile: ModelProfile, request: ModelRequest, prompt_text: str) -> str:
        """Return raw model text for one request; raise TransportError on failure."""
        ...


class HttpBackend:
    """Minimal chat-style HTTP backend: one POST per request."""

    def __init__(self, timeout_s: float = 60.0) -> None:
        self._timeout = timeout_s

    def send(self, profile: ModelProfile, request: ModelRequest, prompt_text: str) -> str:
        if not profile.endpoint_url:
            raise TransportError(f"profile {profile.name!r} has no endpoint configured")
        headers = {}
        if profile.auth_env:
            token = os.environ.get(profile.auth_env, "")
            if token:
                headers["Authorization"] = f"Bearer {token}"
        body = {
            "model": profile.name,
            "prompt": prompt_text,
            "text_parts": list(request.text_parts),
            "images": [
                {"path": str(p), "data_b64": None}  # callers attach bytes out of band if needed
                for p in request.image_parts
            ],
            "temperature": 0.0 if request.deterministic else None,
        }
        try:
            resp = httpx.post(profile.endpoint_url, json=body, headers=headers, timeout=self._timeout)
            resp.raise_for_status()
            return resp.json()["text"]
        except (httpx.HTTPError, KeyError, ValueError) as exc:
            raise TransportError(f"backend call failed for {profile.name!r}: {exc}") from exc


class ReplayStore:
    """Directory of request-key -> recorded response files."""

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)

    def _path(self, key: str) -> Path:
        return self.root / f"{key}.json"

    def has(self, key: str) -> bool:
        return self._path(key).exists()

    def get(self, key: str) -> str:
        path = self._path(key)
        if not path.exists():
            raise ReplayMissError(f"no recorded response for request key {key}")
        return json.loads(path.read_text(encoding="utf-8"))["raw_text"]

    def put(self, key: str, raw_text: str, meta: dict | None = None) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        payload = {"raw_text": raw_text, "meta": meta or {}}
        self._path(key).write_text(
            json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    def keys(self) -> tuple[str, ...]:
        if not self.root.exists():
            return ()
        return tuple(sorted(p.stem for p in self.root.glob("*.json")))


class TokenBucket:
    """Simple token bucket; clock and sleeper injectable for tests."""

    def __init__(
        self,
        rate_per_s: float,
        capacity: float,
        clock: Callable[[], float] = time.monotonic,
        sleeper: Callable[[float], None] = time.sleep,
    ) -> None:
        self.rate = rate_per_s
        self.capacity = capacity
        self._tokens = capacity
        self._clock = clock
        self._sleeper = sleeper
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        with self._lock:
            now = self._clock()
            self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
            self._last = now
            if self._tokens < 1.0:
                wait = (1.0 - self._tokens) / self.rate
                self._sleeper(wait)
                self._tokens = 1.0
                self._last = self._clock()
            self._tokens -= 1.0


class ModelGateway:
    """Single entry point for model calls across all pipeline stages.

    Modes: "live" (backend only), "record" (backend, responses written to
    the store), "replay" (store only, misses are errors). In-flight requests
    per profile are bounded by a semaphore; retries are capped at
    max_attempts with exponential backoff.
    """

    def __init__(
        self,
        mode: Literal["live", "record", "replay"] = "replay",
        backend: Backend | None = None,
        store: ReplayStore | None = None,
        prompts: PromptLibrary | None = None,
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
        backoff_base_s: float = 0.5,
        sleeper: Callable[[float], None] = time.sleep,
        rate_limiter: TokenBucket | None = None,
        max_inflight: int = 1,
    ) -> None:
        if mode in ("live", "record") and backend is None:
            raise SemdagError(f"{mode} mode requires a backend")
        if mode in ("record", "replay") and store is None:
            raise SemdagError(f"{mode} mode requires a replay store")
        self.mode = mode
        self.backend = backend
        self.store = store
        self.prompts = prompts or PromptLibrary()
        self.max_attempts = max_attempts
        self.backoff_base_s = backoff_base_s
        self._sleeper = sleeper
        self._rate_limiter = rate_limiter
        self._semaphores: dict[str, threading.BoundedSemaphore] = {}
        self._max_inflight = max_inflight
        self._lock = threading.Lock()
        self.request_log: list[str] = []

    def _semaphore(self, profile: ModelProfile) -> threading.BoundedSemaphore:
        with self._lock:
            if profile.name not in self._semaphores:
                self._semaphores[profile.name] = threading.BoundedSemaphore(self._max_inflight)
            return self._semaphores[profile.name]

    def _check_capabilities(self, profile: ModelProfile, request: ModelRequest) -> None:
        if request.image_parts and "vision" not in profile.capabilities:
            raise CapabilityMismatchError(
                f"profile {profile.name!r} is not vision-capable but the request has image parts"
            )
        if request.text_parts and "text" not in profile.capabilities:
            raise CapabilityMismatchError(f"profile {profile.name!r} is not text-capable")

    def complete(self, profile: ModelProfile, request: ModelRequest) -> ModelResponse:
        self._check_capabilities(profile, request)
        image_hashes = tuple(hash_file(p) for p in request.image_parts)
        key = request_key(profile, request, image_hashes)
        with self._lock:
            self.request_log.append(key)
        started = time.monotonic()

        if self.mode == "replay":
            raw = self.store.get(key)  # raises ReplayMissError; never falls through to live
            parsed = None
            if request.expected_schema_id:
                parsed = extract_structured(raw, request.expected_schema_id)
            return ModelResponse(
                raw_text=raw,
                parsed=parsed,
                request_key=key,
                profile_name=profile.name,
                attempts=1,
                latency_s=time.monotonic() - started,
            )

        prompt_text = self.prompts.get(request.prompt_asset_id)
        last_error: Exception | None = None
        raw: str | None = None
        parsed: Any | None = None
        attempts = 0
        for attempt in range(1, self.max_attempts + 1):
            attempts = attempt
            if attempt > 1:
                self._sleeper(self.backoff_base_s * 2 ** (attempt - 2))
            try:
                if self._rate_limiter is not None:
                    self._rate_limiter.acquire()
                with self._semaphore(profile):
                    raw = self.backend.send(profile, request, prompt_text)
                if request.expected_schema_id:
                    parsed = extract_structured(raw, request.expected_schema_id)
                last_error = None
                break
            except TransportError as exc:
                logger.warning("transport failure for %s (attempt %d/%d): %s", profile.name, attempt, self.max_attempts, exc)
                last_error = exc
                raw = None
            except SchemaViolationError as exc:
                logger.warning("schema failure for %s (attempt %d/%d): %s", profile.name, attempt, self.max_attempts, exc)
                last_error = exc
                parsed = None

        if self.mode == "record" and raw is not None:
            self.store.put(key, raw, meta={"profile": profile.name, "prompt_asset_id": request.prompt_asset_id})
        if last_error is not None:
            raise last_error
        return ModelResponse(
            raw_text=raw,
            parsed=parsed,
            request_key=key,
            profile_name=profile.name,
            attempts=attempts,
            latency_s=time.monotonic() - started,
        )


def load_profiles(config: list[dict]) -> dict[str, ModelProfile]:
    """Build the profile map from backend-config records."""
    profiles: dict[str, ModelProfile] = {}
    for entry in config:
        profile = ModelProfile(
            name=entry["name"],
            family=entry["family"],
            capabilities=frozenset(entry.get("capabilities", ["text"])),
            endpoint_url=entry.get("endpoint"),
            auth_env=entry.get("auth_env"),
        )
        if profile.name in profiles:
            raise SemdagError(f"duplicate profile name {profile.name!r}")
        profiles[profile.name] = profile
    return profiles
