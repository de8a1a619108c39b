/** Canvas authoring client. All geometry lives in grid units; the canvas
 * is only a scaled viewport. Math stays in the pure modules so this file
 * is wiring: pointer events in, overlay pixels out. */

import { postPlan, postSimulate, ApiRequestError } from "./api.js";
import { Replanner } from "./net.js";
import {
  quiverSegments,
  regionLayerPixels,
  voronoiLayerPixels,
  weightLayerPixels,
} from "./overlays.js";
import { decodeBase64Ppm } from "./ppm.js";
import {
  drawInstruction,
  newState,
  paintMaskCell,
  toPlanBody,
  canvasToGrid,
} from "./state.js";
import type { AuthoringState, PlanBody, PlanResponse, SimulateResponse } from "./types.js";

// Same-origin by default; `?api=http://host:port` overrides, and a page
// opened straight from disk falls back to the server's default port (the
// API allows cross-origin requests).
const BASE_URL =
  new URLSearchParams(window.location.search).get("api") ??
  (window.location.protocol === "file:" ? "http://127.0.0.1:8787" : "");
const CANVAS_SIZE = 512;

type Tool = "arrow" | "mask" | "erase";

interface Ui {
  canvas: HTMLCanvasElement;
  ctx: CanvasRenderingContext2D;
  banner: HTMLElement;
  toast: HTMLElement;
  metrics: HTMLElement;
  history: HTMLElement;
  legend: HTMLElement;
}

let state: AuthoringState = newState({ width: 16, height: 16 });
let lastGood: PlanResponse | null = null;
let background: HTMLImageElement | null = null;
let tool: Tool = "arrow";
let pressAt: [number, number] | null = null;

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el;
}

function buildUi(): Ui {
  const canvas = $("board") as HTMLCanvasElement;
  canvas.width = CANVAS_SIZE;
  canvas.height = CANVAS_SIZE;
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("2d context unavailable");
  return {
    canvas,
    ctx,
    banner: $("banner"),
    toast: $("toast"),
    metrics: $("metrics"),
    history: $("history"),
    legend: $("legend"),
  };
}

const ui = buildUi();

const replanner = new Replanner<PlanBody, PlanResponse>(
  (body) => postPlan(BASE_URL, body),
  (resp) => {
    lastGood = resp;
    hideBanner();
    repaint();
  },
  (err) => {
    // Keep the last good overlay on any failure; just surface the message.
    showBanner(err instanceof ApiRequestError ? `${err.message} (${err.path || "request"})` : String(err));
  },
);

function replan(): void {
  if (state.instructions.length === 0 && !state.mask.some((v) => v)) return;
  replanner.schedule(toPlanBody(state));
}

// ---------------------------------------------------------------------------
// rendering

function repaint(): void {
  const { ctx, canvas } = ui;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (background) {
    ctx.drawImage(background, 0, 0, canvas.width, canvas.height);
  } else {
    ctx.fillStyle = "#1c1e22";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
  }
  drawMask(ctx);
  if (lastGood) {
    const o = state.overlays;
    if (o.regions.visible) blitRgb(ctx, regionLayerPixels(lastGood), lastGood, o.regions.opacity);
    if (o.voronoi.visible) blitRgba(ctx, voronoiLayerPixels(lastGood), lastGood, o.voronoi.opacity);
    if (o.weights.visible) blitRgba(ctx, weightLayerPixels(lastGood), lastGood, o.weights.opacity);
    if (o.field.visible) drawQuiver(ctx, lastGood, o.field.opacity);
  }
  drawInstructions(ctx);
  drawLattice(ctx);
  ui.legend.textContent =
    `${state.grid.width}×${state.grid.height} grid · ` +
    `${(CANVAS_SIZE / state.grid.width).toFixed(0)} px/cell · mode ${state.mode}`;
}

function cellRect(x: number, y: number): [number, number, number, number] {
  const sx = CANVAS_SIZE / state.grid.width;
  const sy = CANVAS_SIZE / state.grid.height;
  return [x * sx, y * sy, sx, sy];
}

function drawMask(ctx: CanvasRenderingContext2D): void {
  ctx.save();
  ctx.fillStyle = "rgba(90, 160, 255, 0.35)";
  const { width, height } = state.grid;
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      if (state.mask[y * width + x]) {
        const [rx, ry, rw, rh] = cellRect(x, y);
        ctx.fillRect(rx, ry, rw, rh);
      }
    }
  }
  ctx.restore();
}

function blitRgb(
  ctx: CanvasRenderingContext2D,
  rgb: Uint8Array,
  resp: PlanResponse,
  opacity: number,
): void {
  const rgba = new Uint8ClampedArray((rgb.length / 3) * 4);
  for (let i = 0; i < rgb.length / 3; i++) {
    rgba[i * 4] = rgb[i * 3]!;
    rgba[i * 4 + 1] = rgb[i * 3 + 1]!;
    rgba[i * 4 + 2] = rgb[i * 3 + 2]!;
    rgba[i * 4 + 3] = 255;
  }
  blitRgba(ctx, rgba, resp, opacity);
}

function blitRgba(
  ctx: CanvasRenderingContext2D,
  rgba: Uint8ClampedArray,
  resp: PlanResponse,
  opacity: number,
): void {
  const { width, height } = resp.grid;
  const off = new OffscreenCanvas(width, height);
  const octx = off.getContext("2d");
  if (!octx) return;
  const image = octx.createImageData(width, height);
  image.data.set(rgba);
  octx.putImageData(image, 0, 0);
  ctx.save();
  ctx.globalAlpha = opacity;
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, CANVAS_SIZE, CANVAS_SIZE);
  ctx.restore();
}

function drawQuiver(ctx: CanvasRenderingContext2D, resp: PlanResponse, opacity: number): void {
  ctx.save();
  ctx.globalAlpha = opacity;
  ctx.strokeStyle = "#f5f5f5";
  ctx.lineWidth = 1.5;
  for (const seg of quiverSegments(resp.field, resp.grid, { width: CANVAS_SIZE, height: CANVAS_SIZE })) {
    ctx.beginPath();
    ctx.moveTo(seg.x0, seg.y0);
    ctx.lineTo(seg.x1, seg.y1);
    ctx.stroke();
    ctx.beginPath();
    ctx.arc(seg.x1, seg.y1, 2, 0, Math.PI * 2);
    ctx.fill();
  }
  ctx.restore();
}

function drawInstructions(ctx: CanvasRenderingContext2D): void {
  ctx.save();
  ctx.strokeStyle = "#ffd166";
  ctx.fillStyle = "#ffd166";
  ctx.lineWidth = 2;
  const sx = CANVAS_SIZE / state.grid.width;
  const sy = CANVAS_SIZE / state.grid.height;
  for (const instr of state.instructions) {
    const [hx, hy] = [instr.handle[0] * sx, instr.handle[1] * sy];
    const [tx, ty] = [instr.target[0] * sx, instr.target[1] * sy];
    ctx.beginPath();
    ctx.moveTo(hx, hy);
    ctx.lineTo(tx, ty);
    ctx.stroke();
    ctx.beginPath();
    ctx.arc(hx, hy, 4, 0, Math.PI * 2);
    ctx.fill();
    ctx.beginPath();
    ctx.arc(tx, ty, 3, 0, Math.PI * 2);
    ctx.stroke();
  }
  ctx.restore();
}

function drawLattice(ctx: CanvasRenderingContext2D): void {
  ctx.save();
  ctx.strokeStyle = "rgba(255,255,255,0.08)";
  for (let x = 1; x < state.grid.width; x++) {
    const px = (x * CANVAS_SIZE) / state.grid.width;
    ctx.beginPath();
    ctx.moveTo(px, 0);
    ctx.lineTo(px, CANVAS_SIZE);
    ctx.stroke();
  }
  for (let y = 1; y < state.grid.height; y++) {
    const py = (y * CANVAS_SIZE) / state.grid.height;
    ctx.beginPath();
    ctx.moveTo(0, py);
    ctx.lineTo(CANVAS_SIZE, py);
    ctx.stroke();
  }
  ctx.restore();
}

// ---------------------------------------------------------------------------
// notifications

let toastTimer: ReturnType<typeof setTimeout> | null = null;

function showToast(text: string): void {
  ui.toast.textContent = text;
  ui.toast.classList.add("show");
  if (toastTimer) clearTimeout(toastTimer);
  toastTimer = setTimeout(() => ui.toast.classList.remove("show"), 2500);
}

function showBanner(text: string): void {
  ui.banner.textContent = text;
  ui.banner.classList.add("show");
}

function hideBanner(): void {
  ui.banner.classList.remove("show");
}

// ---------------------------------------------------------------------------
// pointer handling

function canvasPos(ev: MouseEvent): [number, number] {
  const rect = ui.canvas.getBoundingClientRect();
  return [
    ((ev.clientX - rect.left) * ui.canvas.width) / rect.width,
    ((ev.clientY - rect.top) * ui.canvas.height) / rect.height,
  ];
}

ui.canvas.addEventListener("mousedown", (ev) => {
  const pos = canvasPos(ev);
  if (tool === "arrow") {
    pressAt = pos;
  } else {
    const [gx, gy] = canvasToGrid(pos[0], pos[1], ui.canvas, state.grid);
    paintMaskCell(state, gx, gy, tool === "mask");
    repaint();
    replan();
  }
});

ui.canvas.addEventListener("mousemove", (ev) => {
  if (tool === "arrow" || ev.buttons !== 1) return;
  const pos = canvasPos(ev);
  const [gx, gy] = canvasToGrid(pos[0], pos[1], ui.canvas, state.grid);
  paintMaskCell(state, gx, gy, tool === "mask");
  repaint();
  replan();
});

window.addEventListener("mouseup", (ev) => {
  if (tool !== "arrow" || pressAt === null) return;
  const press = pressAt;
  pressAt = null;
  const rect = ui.canvas.getBoundingClientRect();
  const release: [number, number] = [
    ((ev.clientX - rect.left) * ui.canvas.width) / rect.width,
    ((ev.clientY - rect.top) * ui.canvas.height) / rect.height,
  ];
  const added = drawInstruction(state, press, release, ui.canvas);
  if (added === null) {
    showToast("released outside the canvas — instruction discarded");
    return;
  }
  repaint();
  replan();
});

// ---------------------------------------------------------------------------
// simulation panel

async function runSimulation(): Promise<void> {
  const seed = intInput("seed", 0);
  const steps = intInput("steps", 50);
  const activation = intInput("activation", 40);
  const body = { ...toPlanBody(state), seed, steps, activation };
  ui.metrics.textContent = "running…";
  try {
    const resp = await postSimulate(BASE_URL, body);
    renderMetrics(resp, seed);
  } catch (err) {
    ui.metrics.textContent = "";
    showBanner(err instanceof ApiRequestError ? `${err.status}: ${err.message}` : String(err));
  }
}

function renderMetrics(resp: SimulateResponse, seed: number): void {
  const m = resp.metrics;
  const fmt = (v: number | null) => (v === null ? "∞" : v.toExponential(2));
  ui.metrics.textContent =
    `round-trip ${fmt(m.round_trip_rel_err)} · bg residual ${fmt(m.bg_token_residual)} · ` +
    `merges ${m.merges_fired} · γ₀ ${m.gamma_trace[0]?.toFixed(3) ?? "0"}`;

  // Keep previous runs for side-by-side comparison.
  const img = decodeBase64Ppm(resp.preview);
  const card = document.createElement("div");
  card.className = "run";
  const cv = document.createElement("canvas");
  cv.width = img.width;
  cv.height = img.height;
  const cctx = cv.getContext("2d");
  if (cctx) {
    const image = cctx.createImageData(img.width, img.height);
    for (let i = 0; i < img.width * img.height; i++) {
      image.data[i * 4] = img.rgb[i * 3]!;
      image.data[i * 4 + 1] = img.rgb[i * 3 + 1]!;
      image.data[i * 4 + 2] = img.rgb[i * 3 + 2]!;
      image.data[i * 4 + 3] = 255;
    }
    cctx.putImageData(image, 0, 0);
  }
  const label = document.createElement("span");
  label.textContent = `seed ${seed} · T ${m.steps} · a ${m.activation}`;
  card.append(cv, label);
  ui.history.prepend(card);
}

function intInput(id: string, fallback: number): number {
  const el = document.getElementById(id) as HTMLInputElement | null;
  const v = el ? parseInt(el.value, 10) : NaN;
  return Number.isFinite(v) ? v : fallback;
}

// ---------------------------------------------------------------------------
// controls

function bindControls(): void {
  $("tool-arrow").addEventListener("click", () => (tool = "arrow"));
  $("tool-mask").addEventListener("click", () => (tool = "mask"));
  $("tool-erase").addEventListener("click", () => (tool = "erase"));
  $("mode").addEventListener("change", (ev) => {
    state.mode = (ev.target as HTMLSelectElement).value === "move" ? "move" : "drag";
    replan();
    repaint();
  });
  $("trans-width").addEventListener("change", (ev) => {
    state.transWidth = parseInt((ev.target as HTMLInputElement).value, 10) || 0;
    replan();
  });
  $("clear").addEventListener("click", () => {
    state.instructions = [];
    state.mask.fill(0);
    lastGood = null;
    repaint();
  });
  $("undo").addEventListener("click", () => {
    state.instructions.pop();
    repaint();
    replan();
  });
  $("simulate").addEventListener("click", () => void runSimulation());
  for (const layer of ["regions", "field", "weights", "voronoi"] as const) {
    $(`layer-${layer}`).addEventListener("change", (ev) => {
      state.overlays[layer].visible = (ev.target as HTMLInputElement).checked;
      repaint();
    });
  }
  $("image").addEventListener("change", (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (!file) return;
    const img = new Image();
    img.onload = () => {
      background = img;
      repaint();
    };
    img.src = URL.createObjectURL(file);
  });
}

bindControls();
repaint();
