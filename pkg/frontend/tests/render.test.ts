/** Rendering: panes, highlighting, and control gating. */

import { describe, expect, it } from "vitest";

import { layoutGraph } from "../src/layout.js";
import {
  renderApp,
  renderControls,
  renderDagPane,
  renderEvidencePane,
  renderStatusBar,
} from "../src/render.js";
import type { ReviewView } from "../src/store.js";
import { fixtureCandidate } from "./helpers.js";

function viewFor(overrides: Partial<ReviewView> = {}): ReviewView {
  const candidate = overrides.candidate ?? fixtureCandidate();
  const pendingAtQuality = candidate.status === "pending" && candidate.scope_passed;
  return {
    candidate,
    queue: [],
    selection: null,
    conflict: false,
    message: null,
    loading: false,
    editsDisabled: !pendingAtQuality || candidate.edit_count >= candidate.edit_budget,
    showScopeControls: candidate.status === "pending" && !candidate.scope_passed,
    showQualityControls: pendingAtQuality,
    ...overrides,
  };
}

describe("dag pane", () => {
  it("renders four vertices and every edge with an arrowhead", () => {
    const candidate = fixtureCandidate();
    const svg = renderDagPane(candidate, null);
    expect(svg.match(/<g class="node"/g)).toHaveLength(4);
    expect(svg.match(/marker-end="url\(#arrow\)"/g)).toHaveLength(4);
    for (const edge of candidate.dag.edges) {
      expect(svg).toContain(`data-edge="${edge.source}-&gt;${edge.target}"`);
    }
    expect(svg).toContain("<marker id=\"arrow\"");
  });

  it("marks the selected node and edge", () => {
    const candidate = fixtureCandidate();
    const nodeSelected = renderDagPane(candidate, { kind: "node", id: "ascites" });
    expect(nodeSelected).toContain(`class="node selected" data-node="ascites"`);
    const edgeSelected = renderDagPane(candidate, { kind: "edge", source: "cirrhosis", target: "ascites" });
    expect(edgeSelected).toContain(`class="edge selected"`);
  });

  it("layout is deterministic and layered by topological order", () => {
    const candidate = fixtureCandidate();
    const a = layoutGraph(candidate.dag, candidate.topological_order);
    const b = layoutGraph(candidate.dag, candidate.topological_order);
    expect(a).toEqual(b);
    for (const edge of candidate.dag.edges) {
      expect(a.byId.get(edge.source)!.layer).toBeLessThan(a.byId.get(edge.target)!.layer);
    }
  });
});

describe("evidence pane", () => {
  it("lists every node and edge with resolved block texts", () => {
    const candidate = fixtureCandidate();
    const html = renderEvidencePane(candidate, null);
    expect(html).toContain("Cirrhosis is a late stage of liver scarring.");
    expect(html).toContain(`data-evidence-node="cirrhosis"`);
    expect(html).toContain(`data-evidence-edge="cirrhosis-&gt;ascites"`);
    expect(html.match(/no cited blocks/g)).toHaveLength(3); // mortality node + 2 uncited edges
  });

  it("highlights the evidence of the selected element", () => {
    const candidate = fixtureCandidate();
    const html = renderEvidencePane(candidate, { kind: "edge", source: "ascites", target: "infection" });
    expect(html).toContain(`class="evidence-item highlighted" data-evidence-edge="ascites-&gt;infection"`);
    expect(html).not.toContain(`class="evidence-item highlighted" data-evidence-node=`);
  });
});

describe("status and controls", () => {
  it("status bar shows status, edit counter, and version", () => {
    const view = viewFor({ candidate: fixtureCandidate({ edit_count: 2, scope_passed: true, version: 4 }) });
    const html = renderStatusBar(view);
    expect(html).toContain("edits 2/5");
    expect(html).toContain("pending");
    expect(html).toContain("v4");
  });

  it("scope controls offer the full out-of-scope reason taxonomy", () => {
    const html = renderControls(viewFor());
    for (const reason of ["multiple_dags", "temporal", "cyclic", "mixed_edge_semantics", "not_a_graph", "dag_like_other"]) {
      expect(html).toContain(`<option value="${reason}">`);
    }
    expect(html).not.toContain(`data-role="quality-controls"`);
  });

  it("edit controls disabled at the budget with a visible note", () => {
    const view = viewFor({ candidate: fixtureCandidate({ scope_passed: true, edit_count: 5 }) });
    const html = renderControls(view);
    expect(html).toContain(`data-role="edit-button" disabled`);
    expect(html).toContain("Edit budget reached (5/5)");
    expect(html).toContain(`data-action="approve"`); // approve/reject stay available
  });

  it("terminal candidates show no gate controls", () => {
    const view = viewFor({ candidate: fixtureCandidate({ status: "rejected_scope", reject_reason: "cyclic" }) });
    const html = renderControls(view);
    expect(html).not.toContain("data-role=\"scope-controls\"");
    expect(html).not.toContain("data-role=\"quality-controls\"");
    expect(html).toContain("rejected_scope");
  });

  it("conflict banner renders on stale-version conflicts", () => {
    const html = renderApp(viewFor({ conflict: true }));
    expect(html).toContain(`data-role="conflict-banner"`);
  });

  it("full app renders three panes", () => {
    const html = renderApp(viewFor());
    expect(html).toContain("pane-figure");
    expect(html).toContain("pane-dag");
    expect(html).toContain("pane-evidence");
    expect(html).toContain(`src="/api/v1/candidates/p1__f1/figure"`);
  });
});
