/** Typed client for the review service; fetch is injectable for tests. */

import type { CandidateDetail, CandidateSummary, EditOp } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export class ConflictError extends ApiError {}

async function throwFor(response: Response): Promise<never> {
  let detail = response.statusText;
  try {
    const body = await response.json();
    if (body && typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  if (response.status === 409) throw new ConflictError(409, detail);
  throw new ApiError(response.status, detail);
}

export class ReviewApi {
  constructor(
    private base: string = "",
    private fetcher: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await this.fetcher(this.base + path);
    if (!response.ok) await throwFor(response);
    return (await response.json()) as T;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetcher(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) await throwFor(response);
    return (await response.json()) as T;
  }

  listCandidates(status?: string): Promise<CandidateSummary[]> {
    const query = status ? `?status=${encodeURIComponent(status)}` : "";
    return this.getJson(`/api/v1/candidates${query}`);
  }

  getCandidate(id: string): Promise<CandidateDetail> {
    return this.getJson(`/api/v1/candidates/${encodeURIComponent(id)}`);
  }

  postScope(
    id: string,
    decision: "in_scope" | "out_of_scope",
    version: number,
    actor: string,
    reason?: string,
  ): Promise<CandidateSummary> {
    return this.postJson(`/api/v1/candidates/${encodeURIComponent(id)}/scope`, {
      decision,
      reason: reason ?? null,
      actor,
      version,
    });
  }

  postQuality(
    id: string,
    action: "approve" | "reject" | "edit",
    version: number,
    actor: string,
    options: { reason?: string; edit?: EditOp } = {},
  ): Promise<CandidateSummary> {
    return this.postJson(`/api/v1/candidates/${encodeURIComponent(id)}/quality`, {
      action,
      reason: options.reason ?? null,
      edit: options.edit ?? null,
      actor,
      version,
    });
  }

  getAudit(id: string): Promise<Array<Record<string, unknown>>> {
    return this.getJson(`/api/v1/candidates/${encodeURIComponent(id)}/audit`);
  }
}
