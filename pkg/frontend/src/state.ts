// UI state and the render request body derived from it. All parameter
// clamping lives here so the UI can never send out-of-range values.

export interface UiParams {
  K: number;
  gamma: number;
  blades: number;
  rotation: number;
}

export type Focus =
  | { kind: "disparity"; d_f: number }
  | { kind: "point"; x: number; y: number };

export interface UiState {
  sessionId: string | null;
  width: number;
  height: number;
  params: UiParams;
  focus: Focus;
  overlay: boolean;
  pending: boolean;
  lastDf: number | null;
}

export const LIMITS = {
  K: { min: 0, max: 100 },
  gamma: { min: 1, max: 5 },
  blades: [0, 3, 4, 5, 6, 7, 8, 9] as const,
  rotation: { min: 0, max: 2 * Math.PI },
};

function clampRange(v: number, min: number, max: number): number {
  if (!Number.isFinite(v)) return min;
  return Math.min(max, Math.max(min, v));
}

export function clampBlades(v: number): number {
  if (!Number.isFinite(v) || v < 1.5) return 0;
  return Math.round(clampRange(v, 3, 9));
}

export function clampParams(p: UiParams): UiParams {
  return {
    K: clampRange(p.K, LIMITS.K.min, LIMITS.K.max),
    gamma: clampRange(p.gamma, LIMITS.gamma.min, LIMITS.gamma.max),
    blades: clampBlades(p.blades),
    rotation: clampRange(p.rotation, LIMITS.rotation.min, LIMITS.rotation.max),
  };
}

export function initialState(): UiState {
  return {
    sessionId: null,
    width: 0,
    height: 0,
    params: { K: 20, gamma: 2.2, blades: 0, rotation: 0 },
    focus: { kind: "disparity", d_f: 0.5 },
    overlay: false,
    pending: false,
    lastDf: null,
  };
}

export interface RenderBody {
  session_id: string;
  K: number;
  gamma: number;
  blades: number;
  rotation: number;
  quality: "preview" | "full";
  d_f?: number;
  focus_point?: [number, number];
}

export function renderBody(state: UiState, quality: "preview" | "full"): RenderBody {
  if (state.sessionId === null) {
    throw new Error("no active session");
  }
  const p = clampParams(state.params);
  const body: RenderBody = {
    session_id: state.sessionId,
    K: p.K,
    gamma: p.gamma,
    blades: p.blades,
    rotation: p.rotation,
    quality,
  };
  if (state.focus.kind === "disparity") {
    body.d_f = clampRange(state.focus.d_f, 0, 1);
  } else {
    const x = Math.round(clampRange(state.focus.x, 0, state.width - 1));
    const y = Math.round(clampRange(state.focus.y, 0, state.height - 1));
    body.focus_point = [x, y];
  }
  return body;
}
