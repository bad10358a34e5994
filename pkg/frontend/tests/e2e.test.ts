// End-to-end round trip against a live rendering service. Gated behind
// REFOCUS_E2E=1 because it spawns the Python server and real renders:
//
//   cd frontend && REFOCUS_E2E=1 vitest run tests/e2e.test.ts
//
// Covers: upload -> click background -> background sharpens (pixel check),
// export bytes identical to the CLI render, preview latency at the 768px cap.

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import type { RenderBody } from "../src/state.js";

const RUN = process.env.REFOCUS_E2E === "1";
const PORT = 8137;
const BASE = `http://127.0.0.1:${PORT}`;
const LONG = { timeout: 300_000 };

let server: ChildProcess | null = null;
let dir = "";
let fixture: {
  width: number;
  height: number;
  bg_point: [number, number];
  fg_point: [number, number];
};

function python(code: string): string {
  const proc = spawnSync("python3", ["-c", code], { encoding: "utf-8" });
  if (proc.status !== 0) {
    throw new Error(`python failed: ${proc.stderr}`);
  }
  return proc.stdout.trim();
}

const MAKE_FIXTURE = (dir: string) => `
import json
import numpy as np
from scipy import ndimage
from refocus.oracle import generate_scene
from refocus.raster import save_image, write_pfm

scene = None
seed = 0
while scene is None:
    cand = generate_scene(seed, 900, 700)
    if cand.d_fg - cand.d_bg >= 0.45:
        scene = cand
    seed += 1
save_image(${JSON.stringify(dir)} + "/image.png", scene.composite())
write_pfm(${JSON.stringify(dir)} + "/disparity.pfm", scene.disparity())
inside = ndimage.distance_transform_edt(scene.fg_mask > 0.5)
outside = ndimage.distance_transform_edt(scene.fg_mask < 0.5)
fy, fx = np.unravel_index(inside.argmax(), inside.shape)
by, bx = np.unravel_index(outside.argmax(), outside.shape)
print(json.dumps({"width": 900, "height": 700,
                  "bg_point": [int(bx), int(by)], "fg_point": [int(fx), int(fy)]}))
`;

const SHARPNESS = (aPath: string, bPath: string, dir: string) => `
import json
import numpy as np
from refocus.raster import load_image
from refocus.oracle import generate_scene  # noqa: F401  (keeps import cache warm)

def grad_energy(img, x, y, half=40):
    patch = img[max(0, y-half):y+half, max(0, x-half):x+half]
    gx = np.diff(patch, axis=1); gy = np.diff(patch, axis=0)
    return float((gx**2).mean() + (gy**2).mean())

fix = json.load(open(${JSON.stringify(dir)} + "/fixture.json"))
scale = None
a = load_image(${JSON.stringify(aPath)})
b = load_image(${JSON.stringify(bPath)})
sx = a.shape[1] / fix["width"]; sy = a.shape[0] / fix["height"]
bx, by = int(fix["bg_point"][0] * sx), int(fix["bg_point"][1] * sy)
fx, fy = int(fix["fg_point"][0] * sx), int(fix["fg_point"][1] * sy)
print(json.dumps({
    "bg_when_bg_focused": grad_energy(a, bx, by),
    "bg_when_fg_focused": grad_energy(b, bx, by),
    "fg_when_bg_focused": grad_energy(a, fx, fy),
    "fg_when_fg_focused": grad_energy(b, fx, fy),
}))
`;

async function waitForHealth(client: ApiClient): Promise<void> {
  for (let i = 0; i < 120; i++) {
    if (await client.health()) return;
    await new Promise((r) => setTimeout(r, 500));
  }
  throw new Error("server did not become healthy");
}

describe.skipIf(!RUN)("end-to-end against the rendering service", () => {
  const client = new ApiClient(BASE);
  let sessionId = "";

  beforeAll(async () => {
    dir = mkdtempSync(join(tmpdir(), "refocus-e2e-"));
    fixture = JSON.parse(python(MAKE_FIXTURE(dir)));
    writeFileSync(join(dir, "fixture.json"), JSON.stringify(fixture));
    server = spawn("python3", ["-m", "refocus.cli", "serve", "--port", String(PORT)],
                   { stdio: "ignore" });
    await waitForHealth(client);
    const image = new Blob([readFileSync(join(dir, "image.png"))]);
    const disparity = new Blob([readFileSync(join(dir, "disparity.pfm"))]);
    const info = await client.createSession(image, disparity);
    expect(info.width).toBe(fixture.width);
    expect(info.height).toBe(fixture.height);
    sessionId = info.session_id;
  }, 300_000);

  afterAll(() => {
    server?.kill();
    if (dir) rmSync(dir, { recursive: true, force: true });
  });

  function body(point: [number, number], quality: "preview" | "full" = "preview"): RenderBody {
    return { session_id: sessionId, K: 20, gamma: 2.2, blades: 0, rotation: 0,
             quality, focus_point: point };
  }

  // node's undici occasionally reuses a keep-alive socket the server just
  // closed; retry once (browser fetch does not hit this)
  async function renderRetry(b: RenderBody) {
    try {
      return await client.render(b);
    } catch (err) {
      if (err instanceof TypeError || (err as Error).message.includes("fetch failed")) {
        return await client.render(b);
      }
      throw err;
    }
  }

  it("clicking background vs foreground swaps which region is sharp", LONG, async () => {
    const onBg = await renderRetry(body(fixture.bg_point));
    const onFg = await renderRetry(body(fixture.fg_point));
    const aPath = join(dir, "focus_bg.png");
    const bPath = join(dir, "focus_fg.png");
    writeFileSync(aPath, Buffer.from(await onBg.blob.arrayBuffer()));
    writeFileSync(bPath, Buffer.from(await onFg.blob.arrayBuffer()));
    const stats = JSON.parse(python(SHARPNESS(aPath, bPath, dir)));
    expect(stats.bg_when_bg_focused).toBeGreaterThan(1.5 * stats.bg_when_fg_focused);
    expect(stats.fg_when_fg_focused).toBeGreaterThan(1.5 * stats.fg_when_bg_focused);
    expect(onBg.df).not.toBeNull();
    expect(onFg.df).not.toBeNull();
    expect(onBg.df!).toBeLessThan(onFg.df!); // nearer plane has larger disparity
  });

  it("export is byte-identical to the CLI render with the same flags", LONG, async () => {
    const point = fixture.bg_point;
    const exported = await renderRetry(body(point, "full"));
    const exportPath = join(dir, "export.png");
    writeFileSync(exportPath, Buffer.from(await exported.blob.arrayBuffer()));
    const cliPath = join(dir, "cli.png");
    const proc = spawnSync("python3", ["-m", "refocus.cli", "render",
      "--image", join(dir, "image.png"), "--disparity", join(dir, "disparity.pfm"),
      "--K", "20", "--focus", `${point[0]},${point[1]}`, "--gamma", "2.2",
      "--out", cliPath], { encoding: "utf-8" });
    expect(proc.status, proc.stderr).toBe(0);
    const a = readFileSync(exportPath);
    const b = readFileSync(cliPath);
    expect(a.equals(b)).toBe(true);
  });

  it("preview render latency stays under 2 s at the 768px cap", LONG, async () => {
    await renderRetry(body(fixture.bg_point)); // warm caches
    const t0 = performance.now();
    await renderRetry(body(fixture.bg_point));
    const elapsed = performance.now() - t0;
    expect(elapsed).toBeLessThan(2000);
  });
});
