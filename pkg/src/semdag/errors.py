"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations


class SemdagError(Exception):
    """Base class for every error raised by this package."""


class SchemaError(SemdagError):
    """A document failed shape validation; carries the offending field path."""

    def __init__(self, path: str, message: str) -> None:
        self.path = path
        super().__init__(f"{path}: {message}")


class StructureError(SemdagError):
    """A graph violates structural invariants (duplicate ids, cycles, ...)."""

    def __init__(self, findings) -> None:
        self.findings = tuple(findings)
        detail = "; ".join(f"{f.check}: {f.detail}" for f in self.findings)
        super().__init__(f"structural validation failed: {detail}")


class UnknownElementError(SemdagError):
    """An edit referenced a node or edge that does not exist."""


class EditError(SemdagError):
    """An edit would produce an invalid graph; carries validator findings."""

    def __init__(self, findings) -> None:
        self.findings = tuple(findings)
        detail = "; ".join(f"{f.check}: {f.detail}" for f in self.findings)
        super().__init__(f"edit rejected: {detail}")


class FormatError(SemdagError):
    """An interchange or config file could not be parsed."""


class BlockNotFoundError(SemdagError):
    """A block reference did not resolve within its document."""


class GatewayError(SemdagError):
    """Base class for model-gateway failures."""


class CapabilityMismatchError(GatewayError):
    """Request parts require capabilities the profile does not have."""


class TransportError(GatewayError):
    """Backend call failed at the transport level (retryable)."""


class SchemaViolationError(GatewayError):
    """Model output failed structured-schema validation after retries."""

    def __init__(self, schema_id: str, path: str, message: str) -> None:
        self.schema_id = schema_id
        self.path = path
        super().__init__(f"output does not match schema {schema_id!r} at {path}: {message}")


class ReplayMissError(GatewayError):
    """Replay mode saw a request key with no recorded response."""


class StageError(SemdagError):
    """A pipeline stage failed on an item after retries; item is re-queued."""


class InvalidTransitionError(SemdagError):
    """A review action is not legal in the candidate's current state."""


class BudgetExceededError(SemdagError):
    """An edit would push the candidate past the manual-edit budget."""


class VersionConflictError(SemdagError):
    """Optimistic concurrency check failed (stale candidate version)."""


class FamilyConflictError(SemdagError):
    """Judge model family collides with an annotator family."""


class UndefinedStructureError(SemdagError):
    """Structural difference is undefined for fewer than two matched nodes."""


class ConfigError(SemdagError):
    """Pipeline configuration is invalid; nothing was executed."""


class ExportError(SemdagError):
    """Dataset export refused (e.g. non-kept candidates in the store)."""
