/** Pure rendering: view state in, HTML/SVG strings out.
 *
 * Keeping these as string-producing functions makes the contract tests
 * independent of any DOM implementation; main.ts only mounts the strings
 * and wires events by data attributes.
 */

import { layoutGraph, NODE_H, NODE_W } from "./layout.js";
import type { ReviewView } from "./store.js";
import type { CandidateDetail, Selection } from "./types.js";
import { SCOPE_REJECT_REASONS, edgeKey } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function isSelected(selection: Selection | null, kind: "node" | "edge", key: string): boolean {
  if (!selection) return false;
  if (selection.kind === "node" && kind === "node") return selection.id === key;
  if (selection.kind === "edge" && kind === "edge") return edgeKey(selection.source, selection.target) === key;
  return false;
}

export function renderStatusBar(view: ReviewView): string {
  const c = view.candidate;
  if (!c) return `<div class="statusbar">No candidate loaded.</div>`;
  const counter = `edits ${c.edit_count}/${c.edit_budget}`;
  const reason = c.reject_reason ? ` (${escapeHtml(c.reject_reason)})` : "";
  return (
    `<div class="statusbar">` +
    `<span class="status status-${escapeHtml(c.status)}" data-role="status">${escapeHtml(c.status)}${reason}</span>` +
    `<span class="edit-counter" data-role="edit-counter">${counter}</span>` +
    `<span class="version" data-role="version">v${c.version}</span>` +
    `</div>`
  );
}

export function renderBanners(view: ReviewView): string {
  const parts: string[] = [];
  if (view.conflict) {
    parts.push(
      `<div class="banner banner-conflict" data-role="conflict-banner">` +
        `Version conflict: this candidate changed in another session. The view below is the reloaded server state.` +
        `</div>`,
    );
  }
  if (view.message && !view.conflict) {
    parts.push(`<div class="banner banner-error" data-role="error-banner">${escapeHtml(view.message)}</div>`);
  }
  return parts.join("");
}

export function renderFigurePane(candidate: CandidateDetail): string {
  return (
    `<div class="pane pane-figure"><h2>Source figure</h2>` +
    `<img data-role="figure" src="${escapeHtml(candidate.figure.image_url)}" alt="source figure ${escapeHtml(
      candidate.figure.figure_id ?? "",
    )}"/></div>`
  );
}

export function renderDagPane(candidate: CandidateDetail, selection: Selection | null): string {
  const layout = layoutGraph(candidate.dag, candidate.topological_order);
  const parts: string[] = [];
  parts.push(
    `<svg data-role="dag" viewBox="0 0 ${layout.width} ${layout.height}" width="${layout.width}" height="${layout.height}">`,
  );
  parts.push(
    `<defs><marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="7" markerHeight="7" orient="auto-start-reverse">` +
      `<path d="M 0 0 L 10 5 L 0 10 z"/></marker></defs>`,
  );
  for (const edge of candidate.dag.edges) {
    const from = layout.byId.get(edge.source);
    const to = layout.byId.get(edge.target);
    if (!from || !to) continue;
    const key = edgeKey(edge.source, edge.target);
    const selected = isSelected(selection, "edge", key) ? " selected" : "";
    const x1 = from.x;
    const y1 = from.y + NODE_H / 2;
    const x2 = to.x;
    const y2 = to.y - NODE_H / 2 - 4;
    parts.push(
      `<path class="edge${selected}" data-edge="${escapeHtml(key)}" d="M ${x1} ${y1} C ${x1} ${(y1 + y2) / 2}, ${x2} ${
        (y1 + y2) / 2
      }, ${x2} ${y2}" marker-end="url(#arrow)"/>`,
    );
  }
  for (const node of candidate.dag.nodes) {
    const pos = layout.byId.get(node.id);
    if (!pos) continue;
    const selected = isSelected(selection, "node", node.id) ? " selected" : "";
    parts.push(
      `<g class="node${selected}" data-node="${escapeHtml(node.id)}">` +
        `<rect x="${pos.x - NODE_W / 2}" y="${pos.y - NODE_H / 2}" width="${NODE_W}" height="${NODE_H}" rx="8"/>` +
        `<text x="${pos.x}" y="${pos.y + 4}" text-anchor="middle">${escapeHtml(node.label)}</text></g>`,
    );
  }
  parts.push(`</svg>`);
  return `<div class="pane pane-dag"><h2>Reconstructed DAG</h2>${parts.join("")}</div>`;
}

export function renderEvidencePane(candidate: CandidateDetail, selection: Selection | null): string {
  const rows: string[] = [];
  for (const node of candidate.dag.nodes) {
    const highlighted = isSelected(selection, "node", node.id) ? " highlighted" : "";
    const blocks = candidate.evidence.nodes[node.id] ?? [];
    rows.push(
      `<section class="evidence-item${highlighted}" data-evidence-node="${escapeHtml(node.id)}" id="evidence-node-${escapeHtml(
        node.id,
      )}">` +
        `<h3>node: ${escapeHtml(node.label)}</h3>` +
        (node.description ? `<p class="description">${escapeHtml(node.description)}</p>` : "") +
        (blocks.length
          ? blocks
              .map(
                (b) =>
                  `<blockquote data-block="${escapeHtml(b.block_id)}"><code>[${escapeHtml(b.block_id)}]</code> ${escapeHtml(
                    b.text,
                  )}</blockquote>`,
              )
              .join("")
          : `<p class="no-evidence">no cited blocks</p>`) +
        `</section>`,
    );
  }
  for (const edge of candidate.dag.edges) {
    const key = edgeKey(edge.source, edge.target);
    const highlighted = isSelected(selection, "edge", key) ? " highlighted" : "";
    const blocks = candidate.evidence.edges[key] ?? [];
    rows.push(
      `<section class="evidence-item${highlighted}" data-evidence-edge="${escapeHtml(key)}" id="evidence-edge-${escapeHtml(
        key,
      )}">` +
        `<h3>edge: ${escapeHtml(edge.source)} &rarr; ${escapeHtml(edge.target)}</h3>` +
        (edge.description ? `<p class="description">${escapeHtml(edge.description)}</p>` : "") +
        (blocks.length
          ? blocks
              .map(
                (b) =>
                  `<blockquote data-block="${escapeHtml(b.block_id)}"><code>[${escapeHtml(b.block_id)}]</code> ${escapeHtml(
                    b.text,
                  )}</blockquote>`,
              )
              .join("")
          : `<p class="no-evidence">no cited blocks</p>`) +
        `</section>`,
    );
  }
  return `<div class="pane pane-evidence"><h2>Evidence</h2>${rows.join("")}</div>`;
}

export function renderControls(view: ReviewView): string {
  const c = view.candidate;
  if (!c) return "";
  const parts: string[] = [`<div class="controls">`];
  if (view.showScopeControls) {
    const options = SCOPE_REJECT_REASONS.map((r) => `<option value="${r}">${r}</option>`).join("");
    parts.push(
      `<fieldset class="scope-controls" data-role="scope-controls"><legend>Gate 1 — scope</legend>` +
        `<button data-action="scope-in">In scope</button>` +
        `<select data-role="scope-reason">${options}</select>` +
        `<button data-action="scope-out">Reject out-of-scope</button>` +
        `</fieldset>`,
    );
  }
  if (view.showQualityControls) {
    const disabled = view.editsDisabled ? " disabled" : "";
    parts.push(
      `<fieldset class="quality-controls" data-role="quality-controls"><legend>Gate 2 — quality</legend>` +
        `<button data-action="approve" accesskey="a">Approve</button>` +
        `<input data-role="reject-reason" placeholder="reject reason"/>` +
        `<button data-action="reject" accesskey="x">Reject</button>` +
        `<textarea data-role="edit-json" placeholder='edit op, e.g. {"op":"rename_node","node_id":"x","new_id":"y"}'${disabled}></textarea>` +
        `<button data-action="edit" data-role="edit-button"${disabled}>Apply edit</button>` +
        (view.editsDisabled && c.edit_count >= c.edit_budget
          ? `<p class="budget-note" data-role="budget-note">Edit budget reached (${c.edit_count}/${c.edit_budget}); further edits are disabled.</p>`
          : "") +
        `</fieldset>`,
    );
  }
  if (c.status !== "pending") {
    parts.push(`<p class="terminal-note" data-role="terminal-note">This candidate is ${escapeHtml(c.status)}; no further actions.</p>`);
  }
  parts.push(`<button data-action="next" accesskey="n">Next pending candidate</button>`);
  parts.push(`</div>`);
  return parts.join("");
}

export function renderApp(view: ReviewView): string {
  if (view.loading) return `<main class="app"><p>Loading…</p></main>`;
  const c = view.candidate;
  if (!c) {
    return (
      `<main class="app">${renderBanners(view)}` +
      `<p>Select a candidate:</p><ul class="queue">` +
      view.queue
        .map(
          (q) =>
            `<li><a href="#${escapeHtml(q.candidate_id)}" data-candidate="${escapeHtml(q.candidate_id)}">${escapeHtml(
              q.candidate_id,
            )}</a> — ${escapeHtml(q.status)}</li>`,
        )
        .join("") +
      `</ul></main>`
    );
  }
  return (
    `<main class="app">` +
    `<header><h1>${escapeHtml(c.candidate_id)}</h1>${renderStatusBar(view)}${renderBanners(view)}</header>` +
    `<div class="panes">${renderFigurePane(c)}${renderDagPane(c, view.selection)}${renderEvidencePane(c, view.selection)}</div>` +
    renderControls(view) +
    `</main>`
  );
}
