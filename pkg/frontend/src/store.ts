/** Review-screen state: a mirror of the last fetched server state.
 *
 * The store performs no local status transitions. Every action posts to
 * the API and then refetches the candidate, so the rendered state always
 * equals the server's; a stale-version conflict raises the banner and
 * reloads. Selection (which node/edge is highlighted) is the only
 * client-side state.
 */

import { ApiError, ConflictError, ReviewApi } from "./api.js";
import type { CandidateDetail, CandidateSummary, EditOp, Selection } from "./types.js";
import { edgeKey } from "./types.js";

export interface ReviewView {
  candidate: CandidateDetail | null;
  queue: CandidateSummary[];
  selection: Selection | null;
  conflict: boolean;
  message: string | null;
  loading: boolean;
  /** Edit controls disabled: budget reached or candidate not editable. */
  editsDisabled: boolean;
  /** Quality controls are meaningful only after the scope gate. */
  showScopeControls: boolean;
  showQualityControls: boolean;
}

export type Listener = (view: ReviewView) => void;

export class ReviewStore {
  private candidate: CandidateDetail | null = null;
  private queue: CandidateSummary[] = [];
  private selection: Selection | null = null;
  private conflict = false;
  private message: string | null = null;
  private loading = false;
  private listeners: Listener[] = [];

  constructor(
    private api: ReviewApi,
    private actor: string = "reviewer",
  ) {}

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  view(): ReviewView {
    const c = this.candidate;
    const pendingAtQuality = !!c && c.status === "pending" && c.scope_passed;
    return {
      candidate: c,
      queue: this.queue,
      selection: this.selection,
      conflict: this.conflict,
      message: this.message,
      loading: this.loading,
      editsDisabled: !pendingAtQuality || (c ? c.edit_count >= c.edit_budget : true),
      showScopeControls: !!c && c.status === "pending" && !c.scope_passed,
      showQualityControls: pendingAtQuality,
    };
  }

  private emit(): void {
    const view = this.view();
    for (const listener of this.listeners) listener(view);
  }

  async loadQueue(): Promise<void> {
    this.queue = await this.api.listCandidates();
    this.emit();
  }

  async load(candidateId: string): Promise<void> {
    this.loading = true;
    this.conflict = false;
    this.message = null;
    this.emit();
    try {
      const fresh = await this.api.getCandidate(candidateId);
      this.candidate = fresh;
      this.pruneSelection();
    } catch (error) {
      this.candidate = null;
      this.message = error instanceof Error ? error.message : String(error);
    } finally {
      this.loading = false;
      this.emit();
    }
  }

  /** Re-fetch the current candidate; the server is the source of truth. */
  async reload(): Promise<void> {
    if (this.candidate) {
      const fresh = await this.api.getCandidate(this.candidate.candidate_id);
      this.candidate = fresh;
      this.pruneSelection();
      this.emit();
    }
  }

  select(selection: Selection | null): void {
    this.selection = selection;
    this.emit();
  }

  async nextCandidate(): Promise<void> {
    await this.loadQueue();
    const pending = this.queue.filter((c) => c.status === "pending");
    const currentId = this.candidate?.candidate_id;
    const after = pending.find((c) => !currentId || c.candidate_id > currentId) ?? pending[0];
    if (after) await this.load(after.candidate_id);
  }

  async submitScope(decision: "in_scope" | "out_of_scope", reason?: string): Promise<void> {
    await this.roundTrip(() =>
      this.api.postScope(this.require().candidate_id, decision, this.require().version, this.actor, reason),
    );
  }

  async submitQuality(action: "approve" | "reject", reason?: string): Promise<void> {
    await this.roundTrip(() =>
      this.api.postQuality(this.require().candidate_id, action, this.require().version, this.actor, { reason }),
    );
  }

  async submitEdit(edit: EditOp): Promise<void> {
    await this.roundTrip(() =>
      this.api.postQuality(this.require().candidate_id, "edit", this.require().version, this.actor, { edit }),
    );
  }

  private require(): CandidateDetail {
    if (!this.candidate) throw new Error("no candidate loaded");
    return this.candidate;
  }

  /** POST, then always refetch so the view mirrors the server. */
  private async roundTrip(post: () => Promise<CandidateSummary>): Promise<void> {
    this.conflict = false;
    this.message = null;
    try {
      await post();
    } catch (error) {
      if (error instanceof ConflictError) {
        this.conflict = true;
        this.message = "Someone else changed this candidate; showing the latest server state.";
      } else if (error instanceof ApiError) {
        this.message = error.detail;
      } else {
        this.message = error instanceof Error ? error.message : String(error);
      }
    }
    await this.reload();
  }

  /** Selection survives actions only while the element still exists. */
  private pruneSelection(): void {
    const c = this.candidate;
    const s = this.selection;
    if (!c || !s) {
      this.selection = null;
      return;
    }
    if (s.kind === "node" && !c.dag.nodes.some((n) => n.id === s.id)) this.selection = null;
    if (s.kind === "edge" && !c.dag.edges.some((e) => edgeKey(e.source, e.target) === edgeKey(s.source, s.target)))
      this.selection = null;
  }
}
