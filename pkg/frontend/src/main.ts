/** Browser bootstrap: mount the rendered view and wire events.
 *
 * All state lives in the store; this file only translates DOM events into
 * store actions and re-renders on every store emit.
 */

import { ReviewApi } from "./api.js";
import { renderApp } from "./render.js";
import { ReviewStore } from "./store.js";
import type { EditOp } from "./types.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

const store = new ReviewStore(new ReviewApi(""));

store.subscribe((view) => {
  root.innerHTML = renderApp(view);
  const selected = document.querySelector(".evidence-item.highlighted");
  if (selected) selected.scrollIntoView({ block: "nearest" });
});

root.addEventListener("click", (event) => {
  const target = event.target as HTMLElement;
  const nodeEl = target.closest("[data-node]") as HTMLElement | null;
  if (nodeEl) {
    store.select({ kind: "node", id: nodeEl.dataset.node! });
    return;
  }
  const edgeEl = target.closest("[data-edge]") as HTMLElement | null;
  if (edgeEl) {
    const [source, targetId] = edgeEl.dataset.edge!.split("->");
    store.select({ kind: "edge", source, target: targetId });
    return;
  }
  const link = target.closest("[data-candidate]") as HTMLElement | null;
  if (link) {
    event.preventDefault();
    void store.load(link.dataset.candidate!);
    return;
  }
  const button = target.closest("[data-action]") as HTMLButtonElement | null;
  if (!button || button.disabled) return;
  const action = button.dataset.action!;
  const field = (role: string): string =>
    (document.querySelector(`[data-role="${role}"]`) as HTMLInputElement | HTMLSelectElement | null)?.value ?? "";
  if (action === "scope-in") void store.submitScope("in_scope");
  else if (action === "scope-out") void store.submitScope("out_of_scope", field("scope-reason"));
  else if (action === "approve") void store.submitQuality("approve");
  else if (action === "reject") void store.submitQuality("reject", field("reject-reason") || "quality");
  else if (action === "next") void store.nextCandidate();
  else if (action === "edit") {
    const raw = field("edit-json");
    try {
      void store.submitEdit(JSON.parse(raw) as EditOp);
    } catch {
      window.alert("Edit must be a JSON object with an 'op' field.");
    }
  }
});

// Keyboard shortcuts for high-volume review.
document.addEventListener("keydown", (event) => {
  if (event.target instanceof HTMLInputElement || event.target instanceof HTMLTextAreaElement) return;
  const view = store.view();
  if (event.key === "a" && view.showQualityControls) void store.submitQuality("approve");
  else if (event.key === "x" && view.showQualityControls) void store.submitQuality("reject", "quality");
  else if (event.key === "n") void store.nextCandidate();
});

const initial = window.location.hash.slice(1);
void (initial ? store.load(initial) : store.loadQueue());
