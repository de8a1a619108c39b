import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiRequestError, postPlan } from "../src/api.js";
import type { PlanBody } from "../src/types.js";

const BODY: PlanBody = {
  mode: "move",
  grid: { width: 2, height: 2 },
  mask: [[1, 4]],
  instructions: [],
};

function mockFetch(status: number, payload: unknown) {
  return vi.fn(async () => ({
    ok: status >= 200 && status < 300,
    status,
    json: async () => payload,
  })) as unknown as typeof fetch;
}

describe("api client", () => {
  afterEach(() => vi.unstubAllGlobals());

  it("returns the decoded plan on 200", async () => {
    const doc = { format_version: 1, regions: [[0, 4]] };
    vi.stubGlobal("fetch", mockFetch(200, doc));
    await expect(postPlan("", BODY)).resolves.toEqual(doc);
  });

  it("surfaces error and path fields from failures", async () => {
    vi.stubGlobal("fetch", mockFetch(400, { error: "mode must be drag|move", path: "/mode" }));
    const err = await postPlan("", BODY).catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiRequestError);
    expect((err as ApiRequestError).status).toBe(400);
    expect((err as ApiRequestError).message).toMatch(/mode/);
    expect((err as ApiRequestError).path).toBe("/mode");
  });

  it("keeps the HTTP status when the error body is not JSON", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn(async () => ({
        ok: false,
        status: 502,
        json: async () => {
          throw new Error("not json");
        },
      })) as unknown as typeof fetch,
    );
    const err = await postPlan("", BODY).catch((e: unknown) => e);
    expect((err as ApiRequestError).message).toBe("HTTP 502");
  });
});
