import { describe, expect, it } from "vitest";

import { clampBlades, clampParams, initialState, LIMITS, renderBody } from "../src/state.js";

describe("clampParams", () => {
  it("clamps K and gamma to the declared ranges", () => {
    const p = clampParams({ K: 250, gamma: 0.2, blades: 0, rotation: 0 });
    expect(p.K).toBe(LIMITS.K.max);
    expect(p.gamma).toBe(LIMITS.gamma.min);
  });

  it("never produces out-of-range values for any input", () => {
    for (const v of [-1e9, -1, 0, 0.5, 3.7, 99, 1e9, NaN, Infinity]) {
      const p = clampParams({ K: v, gamma: v, blades: v, rotation: v });
      expect(p.K).toBeGreaterThanOrEqual(0);
      expect(p.K).toBeLessThanOrEqual(100);
      expect(p.gamma).toBeGreaterThanOrEqual(1);
      expect(p.gamma).toBeLessThanOrEqual(5);
      expect(LIMITS.blades).toContain(p.blades as 0);
      expect(p.rotation).toBeGreaterThanOrEqual(0);
      expect(p.rotation).toBeLessThanOrEqual(2 * Math.PI);
    }
  });

  it("snaps blades to circle or the 3..9 range", () => {
    expect(clampBlades(0)).toBe(0);
    expect(clampBlades(1)).toBe(0);
    expect(clampBlades(2)).toBe(3);
    expect(clampBlades(6)).toBe(6);
    expect(clampBlades(14)).toBe(9);
  });
});

describe("renderBody", () => {
  it("round-trips on-screen parameters into the request body", () => {
    const state = initialState();
    state.sessionId = "abc";
    state.width = 640;
    state.height = 480;
    state.params = { K: 35, gamma: 3.1, blades: 6, rotation: 0.5 };
    state.focus = { kind: "disparity", d_f: 0.62 };
    const body = renderBody(state, "full");
    expect(body).toEqual({
      session_id: "abc",
      K: 35,
      gamma: 3.1,
      blades: 6,
      rotation: 0.5,
      quality: "full",
      d_f: 0.62,
    });
  });

  it("clamps focus points into the frame and rounds to pixels", () => {
    const state = initialState();
    state.sessionId = "abc";
    state.width = 100;
    state.height = 80;
    state.focus = { kind: "point", x: 150.7, y: -3 };
    const body = renderBody(state, "preview");
    expect(body.focus_point).toEqual([99, 0]);
    expect(body.d_f).toBeUndefined();
  });

  it("requires a session", () => {
    expect(() => renderBody(initialState(), "preview")).toThrow(/session/);
  });
});
