import type { Rle } from "./types.js";

/** Row-major run-length encode; empty input encodes to []. */
export function rleEncode(values: ArrayLike<number>): Rle {
  const out: Rle = [];
  for (let i = 0; i < values.length; i++) {
    const v = values[i] as number;
    const last = out[out.length - 1];
    if (last !== undefined && last[0] === v) {
      last[1] += 1;
    } else {
      out.push([v, 1]);
    }
  }
  return out;
}

export function rleDecode(runs: Rle, expectedLength?: number): Uint8Array {
  let total = 0;
  for (const [, count] of runs) {
    if (!Number.isInteger(count) || count <= 0) {
      throw new Error(`bad run count ${count}`);
    }
    total += count;
  }
  if (expectedLength !== undefined && total !== expectedLength) {
    throw new Error(`RLE covers ${total} cells, expected ${expectedLength}`);
  }
  const out = new Uint8Array(total);
  let pos = 0;
  for (const [value, count] of runs) {
    out.fill(value, pos, pos + count);
    pos += count;
  }
  return out;
}
