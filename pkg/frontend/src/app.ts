// DOM wiring: upload, click-to-focus, sliders, overlay, export.

import { ApiClient, ApiError } from "./api.js";
import { RenderScheduler } from "./scheduler.js";
import { clampParams, initialState, renderBody, UiState } from "./state.js";

const api = new ApiClient("");
const scheduler = new RenderScheduler(120);
const state: UiState = initialState();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

const preview = el<HTMLImageElement>("preview");
const overlayImg = el<HTMLImageElement>("overlay");
const toast = el<HTMLDivElement>("toast");
const dfReadout = el<HTMLSpanElement>("df-readout");
const statusBadge = el<HTMLSpanElement>("status");
const exportBtn = el<HTMLButtonElement>("export");

let previewUrl: string | null = null;
let overlayUrl: string | null = null;
let toastTimer: ReturnType<typeof setTimeout> | null = null;

function showToast(message: string): void {
  toast.textContent = message;
  toast.classList.add("visible");
  if (toastTimer !== null) clearTimeout(toastTimer);
  toastTimer = setTimeout(() => toast.classList.remove("visible"), 4000);
}

function setPending(pending: boolean): void {
  state.pending = pending;
  statusBadge.textContent = pending ? "rendering…" : "idle";
  statusBadge.classList.toggle("busy", pending);
}

function requestPreview(): void {
  if (state.sessionId === null) return;
  const body = renderBody(state, "preview");
  setPending(true);
  scheduler.request(async (isCurrent) => {
    try {
      const result = await api.render(body);
      if (!isCurrent()) return; // a newer request exists; drop this frame
      if (previewUrl !== null) URL.revokeObjectURL(previewUrl);
      previewUrl = URL.createObjectURL(result.blob);
      preview.src = previewUrl;
      if (result.df !== null) {
        state.lastDf = result.df;
        dfReadout.textContent = result.df.toFixed(4);
      }
      if (state.overlay) await refreshOverlay();
    } catch (err) {
      if (isCurrent()) showToast(errorText(err));
    } finally {
      if (isCurrent()) setPending(false);
    }
  });
}

async function refreshOverlay(): Promise<void> {
  if (state.sessionId === null) return;
  try {
    const blob = await api.errorMap(renderBody(state, "preview"));
    if (overlayUrl !== null) URL.revokeObjectURL(overlayUrl);
    overlayUrl = URL.createObjectURL(blob);
    overlayImg.src = overlayUrl;
  } catch (err) {
    showToast(errorText(err));
  }
}

function errorText(err: unknown): string {
  if (err instanceof ApiError) return `server: ${err.message}`;
  return err instanceof Error ? err.message : String(err);
}

function bindSlider(id: string, readoutId: string, apply: (v: number) => void,
                    format: (v: number) => string): void {
  const slider = el<HTMLInputElement>(id);
  const readout = el<HTMLSpanElement>(readoutId);
  const update = () => {
    const v = parseFloat(slider.value);
    apply(v);
    const p = clampParams(state.params);
    state.params = p;
    readout.textContent = format(v);
    requestPreview();
  };
  slider.addEventListener("input", update);
}

async function upload(): Promise<void> {
  const imageInput = el<HTMLInputElement>("image-file");
  const disparityInput = el<HTMLInputElement>("disparity-file");
  const image = imageInput.files?.[0];
  if (!image) {
    showToast("choose an image first");
    return;
  }
  const disparity = disparityInput.files?.[0] ?? null;
  try {
    setPending(true);
    const info = await api.createSession(image, disparity);
    state.sessionId = info.session_id;
    state.width = info.width;
    state.height = info.height;
    el<HTMLSpanElement>("dims").textContent = `${info.width}×${info.height}`;
    requestPreview();
  } catch (err) {
    setPending(false);
    showToast(errorText(err));
  }
}

function onPreviewClick(ev: MouseEvent): void {
  if (state.sessionId === null) return;
  const rect = preview.getBoundingClientRect();
  if (rect.width === 0 || rect.height === 0) return;
  const x = ((ev.clientX - rect.left) / rect.width) * state.width;
  const y = ((ev.clientY - rect.top) / rect.height) * state.height;
  state.focus = { kind: "point", x, y };
  requestPreview();
}

async function exportFull(): Promise<void> {
  if (state.sessionId === null) {
    showToast("upload an image first");
    return;
  }
  const body = renderBody(state, "full");
  exportBtn.disabled = true;
  exportBtn.textContent = "exporting…";
  try {
    let result;
    try {
      result = await api.render(body);
    } catch {
      result = await api.render(body); // one automatic retry
    }
    const url = URL.createObjectURL(result.blob);
    const a = document.createElement("a");
    a.href = url;
    a.download = "refocus-export.png";
    a.click();
    URL.revokeObjectURL(url);
  } catch (err) {
    showToast(`export failed: ${errorText(err)}`);
  } finally {
    exportBtn.disabled = false;
    exportBtn.textContent = "Export full resolution";
  }
}

export function start(): void {
  el<HTMLButtonElement>("upload").addEventListener("click", () => void upload());
  preview.addEventListener("click", onPreviewClick);
  exportBtn.addEventListener("click", () => void exportFull());

  bindSlider("k-slider", "k-readout", (v) => (state.params.K = v), (v) => v.toFixed(0));
  bindSlider("gamma-slider", "gamma-readout", (v) => (state.params.gamma = v),
             (v) => v.toFixed(1));
  bindSlider("blades-slider", "blades-readout", (v) => (state.params.blades = v),
             (v) => (v < 1.5 ? "circle" : String(Math.round(v))));
  bindSlider("rotation-slider", "rotation-readout", (v) => (state.params.rotation = v),
             (v) => `${((v * 180) / Math.PI).toFixed(0)}°`);

  const overlayToggle = el<HTMLInputElement>("overlay-toggle");
  overlayToggle.addEventListener("change", () => {
    // pure client-side composite: toggling never re-renders the bokeh image
    state.overlay = overlayToggle.checked;
    overlayImg.classList.toggle("visible", state.overlay);
    if (state.overlay && overlayImg.src === "") void refreshOverlay();
  });
}

start();
