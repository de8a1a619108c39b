import type { PlanBody, PlanResponse, SimulateResponse } from "./types.js";

export class ApiRequestError extends Error {
  constructor(
    readonly status: number,
    message: string,
    readonly path: string = "",
  ) {
    super(message);
    this.name = "ApiRequestError";
  }
}

async function postJson<T>(url: string, body: unknown): Promise<T> {
  const resp = await fetch(url, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
  });
  if (!resp.ok) {
    let message = `HTTP ${resp.status}`;
    let path = "";
    try {
      const payload = (await resp.json()) as { error?: string; path?: string };
      if (payload.error) message = payload.error;
      if (payload.path) path = payload.path;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiRequestError(resp.status, message, path);
  }
  return (await resp.json()) as T;
}

export function postPlan(baseUrl: string, body: PlanBody): Promise<PlanResponse> {
  return postJson<PlanResponse>(`${baseUrl}/api/plan`, body);
}

export function postSimulate(
  baseUrl: string,
  body: PlanBody & { seed: number; steps: number; activation: number },
): Promise<SimulateResponse> {
  return postJson<SimulateResponse>(`${baseUrl}/api/simulate`, body);
}
