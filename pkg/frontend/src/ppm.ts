/** Decoder for the binary P6 images the service returns (region maps,
 * difference heatmaps). Only maxval 255 is supported, matching the server. */

export interface PpmImage {
  width: number;
  height: number;
  /** packed RGB, 3 bytes per pixel, row-major */
  rgb: Uint8Array;
}

export function decodePpm(bytes: Uint8Array): PpmImage {
  if (bytes[0] !== 0x50 || bytes[1] !== 0x36) {
    throw new Error("not a P6 image");
  }
  // Header: magic, width, height, maxval as whitespace-separated ASCII
  // tokens, with optional '#' comment lines, then a single whitespace byte.
  const fields: number[] = [];
  let pos = 2;
  while (fields.length < 3) {
    if (pos >= bytes.length) throw new Error("truncated header");
    const c = bytes[pos]!;
    if (c === 0x23) {
      while (pos < bytes.length && bytes[pos] !== 0x0a) pos++;
      pos++;
    } else if (c === 0x20 || c === 0x09 || c === 0x0a || c === 0x0d) {
      pos++;
    } else {
      let token = "";
      while (pos < bytes.length && !isSpace(bytes[pos]!)) {
        token += String.fromCharCode(bytes[pos]!);
        pos++;
      }
      const n = Number(token);
      if (!Number.isInteger(n)) throw new Error(`bad header token "${token}"`);
      fields.push(n);
    }
  }
  pos++; // the single whitespace after maxval
  const [width, height, maxval] = fields as [number, number, number];
  if (maxval !== 255) throw new Error(`unsupported maxval ${maxval}`);
  const need = width * height * 3;
  const rgb = bytes.slice(pos, pos + need);
  if (rgb.length !== need) {
    throw new Error(`pixel payload is ${rgb.length} bytes, need ${need}`);
  }
  return { width, height, rgb };
}

function isSpace(byte: number): boolean {
  return byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d;
}

export function decodeBase64Ppm(b64: string): PpmImage {
  return decodePpm(base64ToBytes(b64));
}

function base64ToBytes(b64: string): Uint8Array {
  // atob exists in browsers and in node >= 16; the Buffer fallback keeps the
  // decoder usable in older node without pulling in @types/node.
  if (typeof atob === "function") {
    const bin = atob(b64);
    const out = new Uint8Array(bin.length);
    for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
    return out;
  }
  const nodeBuffer = (globalThis as {
    Buffer?: { from(data: string, encoding: string): Uint8Array };
  }).Buffer;
  if (nodeBuffer) return new Uint8Array(nodeBuffer.from(b64, "base64"));
  throw new Error("no base64 decoder available");
}
