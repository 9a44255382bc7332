/** Test doubles: a fixture candidate and a scripted fake review server. */

import type { CandidateDetail, EditOp } from "../src/types.js";
import { edgeKey } from "../src/types.js";
import type { FetchLike } from "../src/api.js";

export function fixtureCandidate(overrides: Partial<CandidateDetail> = {}): CandidateDetail {
  const base: CandidateDetail = {
    candidate_id: "p1__f1",
    status: "pending",
    scope_passed: false,
    edit_count: 0,
    edit_budget: 5,
    version: 1,
    reject_reason: null,
    dag: {
      provenance: { paper_id: "p1", source_repo: "arxiv", figure_id: "f1" },
      context: { theme: "liver disease", domains: ["Hepatology"], category: "causal diagram", nature: "technical" },
      nodes: [
        { id: "cirrhosis", label: "Cirrhosis", aliases: [], description: "Liver scarring.", evidence: ["b2"] },
        { id: "ascites", label: "Ascites", aliases: [], description: "", evidence: ["b3"] },
        { id: "infection", label: "Infection", aliases: [], description: "", evidence: ["b4"] },
        { id: "mortality", label: "Mortality", aliases: [], description: "", evidence: [] },
      ],
      edges: [
        { source: "cirrhosis", target: "ascites", description: "causes", evidence: ["b3"] },
        { source: "ascites", target: "infection", description: "", evidence: ["b4"] },
        { source: "infection", target: "mortality", description: "", evidence: [] },
        { source: "cirrhosis", target: "mortality", description: "", evidence: [] },
      ],
    },
    topological_order: ["cirrhosis", "ascites", "infection", "mortality"],
    figure: { figure_id: "f1", image_url: "/api/v1/candidates/p1__f1/figure" },
    evidence: {
      nodes: {
        cirrhosis: [{ block_id: "b2", text: "Cirrhosis is a late stage of liver scarring." }],
        ascites: [{ block_id: "b3", text: "Cirrhosis causes ascites." }],
        infection: [{ block_id: "b4", text: "Ascites raises infection risk." }],
        mortality: [],
      },
      edges: {
        [edgeKey("cirrhosis", "ascites")]: [{ block_id: "b3", text: "Cirrhosis causes ascites." }],
        [edgeKey("ascites", "infection")]: [{ block_id: "b4", text: "Ascites raises infection risk." }],
        [edgeKey("infection", "mortality")]: [],
        [edgeKey("cirrhosis", "mortality")]: [],
      },
    },
  };
  return { ...base, ...overrides };
}

function json(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), { status, headers: { "Content-Type": "application/json" } });
}

/** Server double with real version checks and edit-budget behavior.
 *
 * Transitions mirror the review service's observable contract (the thing
 * the UI must stay in sync with); the UI under test never sees the
 * internals, only HTTP responses.
 */
export class FakeReviewServer {
  state: CandidateDetail;
  requests: string[] = [];

  constructor(state: CandidateDetail = fixtureCandidate()) {
    this.state = state;
  }

  summary() {
    const { candidate_id, status, scope_passed, edit_count, edit_budget, version, reject_reason } = this.state;
    return { candidate_id, status, scope_passed, edit_count, edit_budget, version, reject_reason };
  }

  fetch: FetchLike = async (input, init) => {
    const url = typeof input === "string" ? input : String(input);
    const method = init?.method ?? "GET";
    this.requests.push(`${method} ${url}`);

    if (method === "GET" && url.endsWith("/api/v1/candidates")) {
      return json([this.summary()]);
    }
    if (method === "GET" && url.includes("/candidates/")) {
      const id = decodeURIComponent(url.split("/candidates/")[1].split("/")[0]);
      if (id !== this.state.candidate_id) return json({ detail: `unknown candidate '${id}'` }, 404);
      return json(this.state);
    }
    const body = init?.body ? JSON.parse(String(init.body)) : {};
    if (body.version !== this.state.version) {
      return json({ detail: `candidate is at version ${this.state.version}, client expected ${body.version}` }, 409);
    }
    if (this.state.status !== "pending") {
      return json({ detail: `candidate is ${this.state.status}` }, 422);
    }
    if (url.endsWith("/scope")) {
      if (this.state.scope_passed) return json({ detail: "scope already decided" }, 422);
      if (body.decision === "in_scope") {
        this.state = { ...this.state, scope_passed: true, version: this.state.version + 1 };
      } else {
        this.state = {
          ...this.state,
          status: "rejected_scope",
          reject_reason: body.reason ?? "out_of_scope",
          version: this.state.version + 1,
        };
      }
      return json(this.summary());
    }
    if (url.endsWith("/quality")) {
      if (!this.state.scope_passed) return json({ detail: "has not passed the scope gate" }, 422);
      if (body.action === "approve") {
        this.state = {
          ...this.state,
          status: this.state.edit_count === 0 ? "approved" : "approved_with_edits",
          version: this.state.version + 1,
        };
        return json(this.summary());
      }
      if (body.action === "reject") {
        this.state = {
          ...this.state,
          status: "rejected_quality",
          reject_reason: body.reason ?? "quality",
          version: this.state.version + 1,
        };
        return json(this.summary());
      }
      // edit
      if (this.state.edit_count >= this.state.edit_budget) {
        this.state = {
          ...this.state,
          status: "rejected_quality",
          reject_reason: "over_budget",
          version: this.state.version + 1,
        };
        return json({ detail: "budget_exceeded: already at 5 applied edits" }, 422);
      }
      const edit = body.edit as EditOp;
      if (edit.op === "rename_node") {
        this.state = {
          ...this.state,
          dag: {
            ...this.state.dag,
            nodes: this.state.dag.nodes.map((n) => (n.id === edit.node_id ? { ...n, id: edit.new_id } : n)),
            edges: this.state.dag.edges.map((e) => ({
              ...e,
              source: e.source === edit.node_id ? edit.new_id : e.source,
              target: e.target === edit.node_id ? edit.new_id : e.target,
            })),
          },
        };
      }
      this.state = { ...this.state, edit_count: this.state.edit_count + 1, version: this.state.version + 1 };
      return json(this.summary());
    }
    return json({ detail: `unrouted request ${method} ${url}` }, 500);
  };
}
