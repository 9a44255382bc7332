/** Payload types for the review service API (/api/v1). */

export interface DagNode {
  id: string;
  label: string;
  aliases: string[];
  description: string;
  evidence: string[];
}

export interface DagEdge {
  source: string;
  target: string;
  description: string;
  evidence: string[];
}

export interface SemanticDag {
  provenance: { paper_id: string; source_repo: string; figure_id?: string };
  context: { theme: string; domains: string[]; category: string; nature: string };
  nodes: DagNode[];
  edges: DagEdge[];
}

export interface EvidenceBlock {
  block_id: string;
  text: string;
}

export interface CandidateSummary {
  candidate_id: string;
  status: string;
  scope_passed: boolean;
  edit_count: number;
  edit_budget: number;
  version: number;
  reject_reason: string | null;
}

export interface CandidateDetail extends CandidateSummary {
  dag: SemanticDag;
  topological_order: string[];
  figure: { figure_id: string | null; image_url: string };
  evidence: {
    nodes: Record<string, EvidenceBlock[]>;
    edges: Record<string, EvidenceBlock[]>;
  };
}

/** Edit operations accepted by the quality gate, tagged by op name. */
export type EditOp =
  | { op: "add_node"; node: Partial<DagNode> & { id: string; label: string } }
  | { op: "remove_node"; node_id: string }
  | { op: "rename_node"; node_id: string; new_id: string }
  | { op: "add_edge"; edge: Partial<DagEdge> & { source: string; target: string } }
  | { op: "remove_edge"; source: string; target: string }
  | { op: "redirect_edge"; source: string; target: string; new_source: string; new_target: string }
  | { op: "replace_evidence"; evidence: string[]; node_id?: string; edge?: [string, string] }
  | { op: "replace_description"; description: string; node_id?: string; edge?: [string, string] };

export const SCOPE_REJECT_REASONS = [
  "multiple_dags",
  "temporal",
  "cyclic",
  "mixed_edge_semantics",
  "not_a_graph",
  "dag_like_other",
] as const;

export type Selection = { kind: "node"; id: string } | { kind: "edge"; source: string; target: string };

export function edgeKey(source: string, target: string): string {
  return `${source}->${target}`;
}
