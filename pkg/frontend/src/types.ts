/** Wire types for the planning service plus the client's authoring state. */

export interface GridSize {
  width: number;
  height: number;
}

export type Mode = "drag" | "move";

/** [value, count] pairs over the row-major flattened grid. */
export type Rle = [number, number][];

export interface InstructionJson {
  handle: [number, number];
  target: [number, number];
}

/** Request body for POST /api/plan (and the base of /api/simulate). */
export interface PlanBody {
  mode: Mode;
  grid: GridSize;
  mask: Rle;
  instructions: InstructionJson[];
  scale?: [number, number];
  trans_width?: number;
  noise_seed?: number;
}

/** One row of the response field: x, y, vx, vy, winner, weight (null = pinned handle cell). */
export type FieldRow = [number, number, number, number, number, number | null];

export interface PlanResponse {
  format_version: number;
  grid: GridSize;
  /** region labels, RLE over 0=bg 1=dst 2=inp 3=trans */
  regions: Rle;
  field: FieldRow[];
  maps: {
    /** rows of [dst_x, dst_y, src_x, src_y] */
    M: [number, number, number, number][];
    /** matching weight per M row, in (0, 1] */
    A: number[];
  };
  stats: { bg: number; dst: number; inp: number; trans: number };
}

export interface SimulateMetrics {
  steps: number;
  activation: number;
  seed: number;
  noise_seed: number;
  round_trip_rel_err: number | null;
  bg_token_residual: number | null;
  attn_residual_max: number | null;
  gamma_trace: number[];
  gamma_active: number[];
  merges_fired: number;
  augmented_queries: number;
  fixed_point_iters_max: number;
  regions: { bg: number; dst: number; inp: number; trans: number };
}

export interface SimulateResponse {
  metrics: SimulateMetrics;
  /** base64 binary P6 PPM difference heatmap */
  preview: string;
}

export interface ApiError {
  error: string;
  path: string;
}

export interface OverlaySettings {
  regions: { visible: boolean; opacity: number };
  field: { visible: boolean; opacity: number };
  weights: { visible: boolean; opacity: number };
  voronoi: { visible: boolean; opacity: number };
}

export interface AuthoringState {
  grid: GridSize;
  mode: Mode;
  /** row-major editable flags, length width*height */
  mask: Uint8Array;
  instructions: InstructionJson[];
  scale: [number, number];
  transWidth: number;
  noiseSeed: number;
  overlays: OverlaySettings;
}
