// Thin client for the rendering service HTTP API.

import type { RenderBody } from "./state.js";

export interface SessionInfo {
  session_id: string;
  width: number;
  height: number;
}

export interface RenderResult {
  blob: Blob;
  df: number | null;
}

export class ApiError extends Error {
  constructor(public readonly status: number, message: string) {
    super(message);
  }
}

async function raiseForStatus(resp: Response): Promise<void> {
  if (resp.ok) return;
  let message = `${resp.status} ${resp.statusText}`;
  try {
    const body = await resp.json();
    if (body && typeof body.error === "string") {
      message = body.error;
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new ApiError(resp.status, message);
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  async health(): Promise<boolean> {
    try {
      const resp = await fetch(`${this.baseUrl}/health`);
      return resp.ok;
    } catch {
      return false;
    }
  }

  async createSession(image: Blob, disparity: Blob | null): Promise<SessionInfo> {
    const form = new FormData();
    form.append("image", image, "image.png");
    if (disparity !== null) {
      form.append("disparity", disparity, "disparity.pfm");
    }
    const resp = await fetch(`${this.baseUrl}/session`, { method: "POST", body: form });
    await raiseForStatus(resp);
    return (await resp.json()) as SessionInfo;
  }

  async render(body: RenderBody): Promise<RenderResult> {
    const resp = await fetch(`${this.baseUrl}/render`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    await raiseForStatus(resp);
    const header = resp.headers.get("X-Refocus-Df");
    return { blob: await resp.blob(), df: header === null ? null : parseFloat(header) };
  }

  async errorMap(body: RenderBody): Promise<Blob> {
    const params = new URLSearchParams({
      session_id: body.session_id,
      K: String(body.K),
      quality: body.quality,
    });
    if (body.d_f !== undefined) {
      params.set("d_f", String(body.d_f));
    } else if (body.focus_point !== undefined) {
      params.set("focus_x", String(body.focus_point[0]));
      params.set("focus_y", String(body.focus_point[1]));
    }
    const resp = await fetch(`${this.baseUrl}/errormap?${params.toString()}`);
    await raiseForStatus(resp);
    return resp.blob();
  }
}
