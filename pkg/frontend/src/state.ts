import { rleDecode, rleEncode } from "./rle.js";
import type {
  AuthoringState,
  GridSize,
  InstructionJson,
  Mode,
  OverlaySettings,
  PlanBody,
} from "./types.js";

export const DEFAULT_OVERLAYS: OverlaySettings = {
  regions: { visible: true, opacity: 0.55 },
  field: { visible: true, opacity: 0.9 },
  weights: { visible: false, opacity: 0.7 },
  voronoi: { visible: false, opacity: 0.35 },
};

export function newState(grid: GridSize, mode: Mode = "drag"): AuthoringState {
  return {
    grid,
    mode,
    mask: new Uint8Array(grid.width * grid.height),
    instructions: [],
    scale: [1, 1],
    transWidth: 2,
    noiseSeed: 0,
    overlays: structuredClone(DEFAULT_OVERLAYS),
  };
}

/** Canvas pixel -> grid coordinates (continuous, clamped to the point
 * rectangle [0, width-1] x [0, height-1] the service accepts). */
export function canvasToGrid(
  px: number,
  py: number,
  canvas: { width: number; height: number },
  grid: GridSize,
): [number, number] {
  const gx = (px * grid.width) / canvas.width;
  const gy = (py * grid.height) / canvas.height;
  return [clamp(gx, 0, grid.width - 1), clamp(gy, 0, grid.height - 1)];
}

function clamp(v: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, v));
}

/** Pointer press/release in canvas pixels -> appended instruction.
 * A release outside the canvas returns null and must leave state alone;
 * a zero-length click is a legitimate pin. */
export function drawInstruction(
  state: AuthoringState,
  press: [number, number],
  release: [number, number],
  canvas: { width: number; height: number },
): InstructionJson | null {
  const [rx, ry] = release;
  if (rx < 0 || ry < 0 || rx > canvas.width || ry > canvas.height) {
    return null;
  }
  const instr: InstructionJson = {
    handle: canvasToGrid(press[0], press[1], canvas, state.grid),
    target: canvasToGrid(rx, ry, canvas, state.grid),
  };
  state.instructions.push(instr);
  return instr;
}

export function paintMaskCell(state: AuthoringState, x: number, y: number, on: boolean): void {
  const { width, height } = state.grid;
  const cx = Math.floor(x);
  const cy = Math.floor(y);
  if (cx < 0 || cy < 0 || cx >= width || cy >= height) return;
  state.mask[cy * width + cx] = on ? 1 : 0;
}

/** Serialize to the request body the planning endpoints accept. */
export function toPlanBody(state: AuthoringState): PlanBody {
  return {
    mode: state.mode,
    grid: { width: state.grid.width, height: state.grid.height },
    mask: rleEncode(state.mask),
    instructions: state.instructions.map((i) => ({
      handle: [i.handle[0], i.handle[1]],
      target: [i.target[0], i.target[1]],
    })),
    scale: [state.scale[0], state.scale[1]],
    trans_width: state.transWidth,
    noise_seed: state.noiseSeed,
  };
}

/** Inverse of toPlanBody; overlay settings are display-only and reset. */
export function fromPlanBody(body: PlanBody): AuthoringState {
  const state = newState(body.grid, body.mode);
  state.mask = rleDecode(body.mask, body.grid.width * body.grid.height);
  state.instructions = body.instructions.map((i) => ({
    handle: [i.handle[0], i.handle[1]],
    target: [i.target[0], i.target[1]],
  }));
  if (body.scale) state.scale = [body.scale[0], body.scale[1]];
  if (body.trans_width !== undefined) state.transWidth = body.trans_width;
  if (body.noise_seed !== undefined) state.noiseSeed = body.noise_seed;
  return state;
}
