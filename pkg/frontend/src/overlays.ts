import type { FieldRow, GridSize, PlanResponse } from "./types.js";
import { rleDecode } from "./rle.js";

/** Region palette, byte-identical to the server's PPM renderer. */
export const REGION_PALETTE: ReadonlyArray<readonly [number, number, number]> = [
  [128, 128, 128], // bg
  [220, 50, 50], // dst
  [235, 200, 40], // inp
  [60, 180, 90], // trans
];

/** Alternating per-instruction tint for the fused assignment cells. */
export const VORONOI_TINTS: ReadonlyArray<readonly [number, number, number]> = [
  [215, 60, 60],
  [70, 90, 215],
];

/** Packed RGB region image (3 bytes/pixel, row-major), same bytes as the
 * service's PPM payload for the same plan. */
export function regionLayerPixels(response: PlanResponse): Uint8Array {
  const { width, height } = response.grid;
  const labels = rleDecode(response.regions, width * height);
  const out = new Uint8Array(width * height * 3);
  for (let i = 0; i < labels.length; i++) {
    const color = REGION_PALETTE[labels[i]!];
    if (!color) throw new Error(`unknown region label ${labels[i]}`);
    out[i * 3] = color[0];
    out[i * 3 + 1] = color[1];
    out[i * 3 + 2] = color[2];
  }
  return out;
}

/** RGBA heatmap of the matching weight A over dst cells; transparent
 * elsewhere. A pinned handle destination (A = 1) renders at full strength. */
export function weightLayerPixels(response: PlanResponse): Uint8ClampedArray {
  const { width, height } = response.grid;
  const out = new Uint8ClampedArray(width * height * 4);
  const { M, A } = response.maps;
  for (let j = 0; j < M.length; j++) {
    const row = M[j]!;
    const weight = A[j] ?? 0;
    const idx = (row[1] * width + row[0]) * 4;
    out[idx] = 255;
    out[idx + 1] = 64;
    out[idx + 2] = 0;
    out[idx + 3] = Math.round(255 * weight);
  }
  return out;
}

export interface QuiverSegment {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
  winner: number;
}

/** Per-cell displacement arrows in canvas pixels. Cells are drawn from
 * their centers; grid coordinate g maps to pixel (g + 0.5) * cellSize. */
export function quiverSegments(
  field: FieldRow[],
  grid: GridSize,
  canvas: { width: number; height: number },
): QuiverSegment[] {
  const sx = canvas.width / grid.width;
  const sy = canvas.height / grid.height;
  return field.map((row) => ({
    x0: (row[0] + 0.5) * sx,
    y0: (row[1] + 0.5) * sy,
    x1: (row[0] + row[2] + 0.5) * sx,
    y1: (row[1] + row[3] + 0.5) * sy,
    winner: row[4],
  }));
}

/** RGBA tint of each fused cell by winner parity (red/blue alternation). */
export function voronoiLayerPixels(response: PlanResponse): Uint8ClampedArray {
  const { width, height } = response.grid;
  const out = new Uint8ClampedArray(width * height * 4);
  for (const row of response.field) {
    const tint = VORONOI_TINTS[row[4] % 2]!;
    const idx = (row[1] * width + row[0]) * 4;
    out[idx] = tint[0];
    out[idx + 1] = tint[1];
    out[idx + 2] = tint[2];
    out[idx + 3] = 255;
  }
  return out;
}
