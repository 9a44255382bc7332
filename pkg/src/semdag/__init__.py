"""Document-grounded semantic DAG construction, validation, and metrics."""

from .core import (
    AddEdge,
    AddNode,
    DagEdge,
    DagNode,
    Edit,
    Finding,
    GraphContext,
    Nature,
    Provenance,
    RemoveEdge,
    RemoveNode,
    RenameNode,
    RedirectEdge,
    ReplaceDescription,
    ReplaceEvidence,
    SemanticDag,
    ValidationReport,
    apply_edit,
    canonical_id,
    topological_order,
    validate_structure,
)
from .serialization import dag_from_dict, dag_to_dict, parse_semantic_dag, serialize_canonical

__version__ = "0.1.0"

__all__ = [
    "AddEdge",
    "AddNode",
    "DagEdge",
    "DagNode",
    "Edit",
    "Finding",
    "GraphContext",
    "Nature",
    "Provenance",
    "RemoveEdge",
    "RemoveNode",
    "RenameNode",
    "RedirectEdge",
    "ReplaceDescription",
    "ReplaceEvidence",
    "SemanticDag",
    "ValidationReport",
    "apply_edit",
    "canonical_id",
    "dag_from_dict",
    "dag_to_dict",
    "parse_semantic_dag",
    "serialize_canonical",
    "topological_order",
    "validate_structure",
    "__version__",
]
