/** API client: URLs, bodies, and error mapping. */

import { describe, expect, it } from "vitest";

import { ApiError, ConflictError, ReviewApi } from "../src/api.js";

function recordingFetch(status: number, body: unknown) {
  const calls: Array<{ url: string; init?: RequestInit }> = [];
  const fetcher = async (url: string, init?: RequestInit) => {
    calls.push({ url, init });
    return new Response(JSON.stringify(body), { status });
  };
  return { calls, fetcher };
}

describe("ReviewApi", () => {
  it("builds candidate URLs and parses payloads", async () => {
    const { calls, fetcher } = recordingFetch(200, [{ candidate_id: "c1" }]);
    const api = new ReviewApi("", fetcher);
    const rows = await api.listCandidates("pending");
    expect(rows[0].candidate_id).toBe("c1");
    expect(calls[0].url).toBe("/api/v1/candidates?status=pending");
  });

  it("posts scope decisions with actor and version", async () => {
    const { calls, fetcher } = recordingFetch(200, { candidate_id: "c1", version: 2 });
    const api = new ReviewApi("", fetcher);
    await api.postScope("c1", "out_of_scope", 1, "expert-1", "cyclic");
    expect(calls[0].url).toBe("/api/v1/candidates/c1/scope");
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({
      decision: "out_of_scope",
      reason: "cyclic",
      actor: "expert-1",
      version: 1,
    });
  });

  it("posts edits through the quality gate", async () => {
    const { calls, fetcher } = recordingFetch(200, { candidate_id: "c1", version: 3 });
    const api = new ReviewApi("", fetcher);
    await api.postQuality("c1", "edit", 2, "expert-1", {
      edit: { op: "rename_node", node_id: "a", new_id: "b" },
    });
    const body = JSON.parse(String(calls[0].init?.body));
    expect(body.action).toBe("edit");
    expect(body.edit).toEqual({ op: "rename_node", node_id: "a", new_id: "b" });
  });

  it("maps 409 to ConflictError with the server detail", async () => {
    const { fetcher } = recordingFetch(409, { detail: "client expected 1" });
    const api = new ReviewApi("", fetcher);
    await expect(api.postScope("c1", "in_scope", 1, "e")).rejects.toThrowError(ConflictError);
  });

  it("maps other failures to ApiError", async () => {
    const { fetcher } = recordingFetch(422, { detail: "invalid transition" });
    const api = new ReviewApi("", fetcher);
    const error = await api.postQuality("c1", "approve", 1, "e").catch((e) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect(error).not.toBeInstanceOf(ConflictError);
    expect(error.detail).toBe("invalid transition");
    expect(error.status).toBe(422);
  });
});
