import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";

import { decodeBase64Ppm, decodePpm } from "../src/ppm.js";

const goldenPpm = new Uint8Array(
  readFileSync(new URL("./fixtures/translate6_regions.ppm", import.meta.url)),
);

describe("ppm decoder", () => {
  it("decodes the committed region image", () => {
    const img = decodePpm(goldenPpm);
    expect(img.width).toBe(6);
    expect(img.height).toBe(6);
    expect(img.rgb.length).toBe(6 * 6 * 3);
    // top-left cell is transition green in the golden plan
    expect([img.rgb[0], img.rgb[1], img.rgb[2]]).toEqual([60, 180, 90]);
  });

  it("round-trips through base64, as /api/simulate previews arrive", () => {
    const b64 = Buffer.from(goldenPpm).toString("base64");
    const img = decodeBase64Ppm(b64);
    expect(Array.from(img.rgb)).toEqual(Array.from(decodePpm(goldenPpm).rgb));
  });

  it("tolerates comment lines in the header", () => {
    const body = new Uint8Array([9, 9, 9]);
    const head = new TextEncoder().encode("P6\n# note\n1 1\n255\n");
    const buf = new Uint8Array(head.length + body.length);
    buf.set(head);
    buf.set(body, head.length);
    const img = decodePpm(buf);
    expect(img.width).toBe(1);
    expect(Array.from(img.rgb)).toEqual([9, 9, 9]);
  });

  it("rejects wrong magic and truncated payloads", () => {
    expect(() => decodePpm(new TextEncoder().encode("P5\n1 1\n255\nx"))).toThrow(/P6/);
    expect(() => decodePpm(goldenPpm.slice(0, goldenPpm.length - 4))).toThrow(/payload/);
  });
});
