"""Ground-truth lens renderer on two-plane scenes, plus the scene generator.

The scene model is two opaque fronto-parallel planes at constant disparity.
Rendering integrates rays over the aperture: each aperture point shifts the
pixel by the plane's signed defocus and picks the foreground color when the
(shifted) mask is set, the hidden background plane otherwise. This is exact
for the two-plane world and serves as the benchmark reference.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit, prange

from .raster import (ApertureSpec, RenderParams, as_image, as_scalar_map,
                     gamma_decode, gamma_encode, resize_bilinear,
                     save_image, write_pfm)

DEFAULT_SAMPLES = 256


@dataclass
class TwoPlaneScene:
    fg_color: np.ndarray
    bg_color: np.ndarray
    fg_mask: np.ndarray  # (H, W) in {0, 1}
    d_fg: float
    d_bg: float

    def __post_init__(self):
        self.fg_color = as_image(self.fg_color)
        self.bg_color = as_image(self.bg_color)
        self.fg_mask = as_scalar_map(self.fg_mask)
        if self.fg_color.shape != self.bg_color.shape or self.fg_color.shape[:2] != self.fg_mask.shape:
            raise ValueError("scene rasters must share dimensions")
        if not self.d_fg > self.d_bg:
            raise ValueError(f"foreground must be nearer: d_fg={self.d_fg} d_bg={self.d_bg}")

    def composite(self) -> np.ndarray:
        """All-in-focus image: foreground over background by the mask."""
        m = self.fg_mask[:, :, None]
        return m * self.fg_color + (1.0 - m) * self.bg_color

    def disparity(self) -> np.ndarray:
        return np.where(self.fg_mask > 0.5, self.d_fg, self.d_bg)


def _sunflower(n: int) -> np.ndarray:
    """Golden-angle spiral: n highly uniform points on the unit disc."""
    i = np.arange(n, dtype=np.float64)
    r = np.sqrt((i + 0.5) / n)
    theta = i * (np.pi * (3.0 - np.sqrt(5.0)))
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def aperture_points(samples: int, spec: ApertureSpec = ApertureSpec()) -> np.ndarray:
    """`samples` low-discrepancy points inside the unit aperture shape.

    Circles use the golden-angle spiral directly; N-gons keep the spiral
    points that fall inside the polygon, growing the spiral until enough
    survive. Deterministic for a given (samples, spec)."""
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    if spec.blades == 0:
        return _sunflower(samples)
    n = spec.blades
    ang = spec.rotation + (2.0 * np.pi / n) * (np.arange(n) + 0.5)
    apothem = math.cos(math.pi / n)
    area_ratio = (0.5 * n * math.sin(2.0 * math.pi / n)) / math.pi
    m = int(math.ceil(samples / area_ratio)) + 8
    while True:
        pts = _sunflower(m)
        keep = np.ones(m, dtype=bool)
        for a in ang:
            keep &= (pts[:, 0] * np.cos(a) + pts[:, 1] * np.sin(a)) <= apothem
        if keep.sum() >= samples:
            return pts[keep][:samples]
        m = int(m * 1.3) + 8


@njit(cache=True, parallel=True)
def _trace_two_plane(fg, bg, mask, ux, uy, s_fg, s_bg):
    H, W = mask.shape
    out = np.zeros((H, W, 3))
    n = ux.size
    for y in prange(H):
        for x in range(W):
            a0 = 0.0
            a1 = 0.0
            a2 = 0.0
            for k in range(n):
                fy = int(math.floor(y + uy[k] * s_fg + 0.5))
                fx = int(math.floor(x + ux[k] * s_fg + 0.5))
                if fy < 0:
                    fy = 0
                elif fy >= H:
                    fy = H - 1
                if fx < 0:
                    fx = 0
                elif fx >= W:
                    fx = W - 1
                if mask[fy, fx] > 0.5:
                    a0 += fg[fy, fx, 0]
                    a1 += fg[fy, fx, 1]
                    a2 += fg[fy, fx, 2]
                else:
                    by = int(math.floor(y + uy[k] * s_bg + 0.5))
                    bx = int(math.floor(x + ux[k] * s_bg + 0.5))
                    if by < 0:
                        by = 0
                    elif by >= H:
                        by = H - 1
                    if bx < 0:
                        bx = 0
                    elif bx >= W:
                        bx = W - 1
                    a0 += bg[by, bx, 0]
                    a1 += bg[by, bx, 1]
                    a2 += bg[by, bx, 2]
            out[y, x, 0] = a0 / n
            out[y, x, 1] = a1 / n
            out[y, x, 2] = a2 / n
    return out


def render_oracle(scene: TwoPlaneScene, params: RenderParams,
                  samples: int = DEFAULT_SAMPLES) -> np.ndarray:
    """Reference render of a two-plane scene by aperture integration."""
    pts = aperture_points(samples, params.aperture)
    s_fg = params.K * (scene.d_fg - params.d_f)
    s_bg = params.K * (scene.d_bg - params.d_f)
    fg = gamma_decode(scene.fg_color, params.gamma)
    bg = gamma_decode(scene.bg_color, params.gamma)
    out = _trace_two_plane(np.ascontiguousarray(fg), np.ascontiguousarray(bg),
                           scene.fg_mask, np.ascontiguousarray(pts[:, 0]),
                           np.ascontiguousarray(pts[:, 1]), s_fg, s_bg)
    return gamma_encode(out, params.gamma)


# ---------------------------------------------------------------------------
# Synthetic scenes
# ---------------------------------------------------------------------------

def _value_noise(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Multi-scale value noise in [0, 1], coarsest octave dominating but with
    fine octaves so in-focus regions carry real detail. Octave wavelengths
    scale with the frame so scene statistics are resolution-independent."""
    out = np.zeros((height, width))
    total = 0.0
    for frac, amp in ((0.04, 1.0), (0.09, 0.5), (0.18, 0.35), (0.37, 0.35), (0.7, 0.5)):
        cy = max(2, round(height * frac))
        cx = max(2, round(width * frac))
        grid = rng.uniform(0.0, 1.0, (cy, cx))
        out += amp * resize_bilinear(grid, width, height)
        total += amp
    return out / total


def _palette(rng: np.random.Generator, noise: np.ndarray) -> np.ndarray:
    """Map noise through a two-color ramp, partly posterized so planes carry
    flat-shaded regions with sharp contours like rendered scene content."""
    c0 = rng.uniform(0.05, 0.95, 3)
    c1 = rng.uniform(0.05, 0.95, 3)
    levels = int(rng.integers(3, 7))
    mix = rng.uniform(0.35, 0.65)
    stepped = (np.floor(noise * levels) + 0.5) / levels
    shade = (1.0 - mix) * noise + mix * stepped
    return c0[None, None, :] + (c1 - c0)[None, None, :] * shade[:, :, None]


def _convex_mask(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    mask = np.zeros((height, width), dtype=bool)
    for _ in range(int(rng.integers(1, 4))):
        cx = rng.uniform(0.2, 0.8) * width
        cy = rng.uniform(0.2, 0.8) * height
        radius = rng.uniform(0.12, 0.32) * min(height, width)
        if rng.random() < 0.5:
            mask |= (xx - cx) ** 2 + (yy - cy) ** 2 <= radius * radius
        else:
            n = int(rng.integers(3, 9))
            rot = rng.uniform(0.0, 2.0 * np.pi)
            sx, sy = rng.uniform(0.6, 1.0, 2)
            ang = rot + 2.0 * np.pi * np.arange(n + 1) / n
            vx = cx + radius * sx * np.cos(ang)
            vy = cy + radius * sy * np.sin(ang)
            inside = np.ones((height, width), dtype=bool)
            for j in range(n):
                ex, ey = vx[j + 1] - vx[j], vy[j + 1] - vy[j]
                inside &= ex * (yy - vy[j]) - ey * (xx - vx[j]) <= 0
            mask |= inside
    return mask


def generate_scene(seed: int, width: int, height: int) -> TwoPlaneScene:
    """Deterministic random two-plane scene.

    Background and foreground get distinct smooth noise palettes; the mask is
    a union of 1-3 convex shapes covering 10-60% of the frame; disparities
    satisfy d_fg - d_bg >= 0.15.
    """
    if width < 32 or height < 32:
        raise ValueError(f"scene dims must be >= 32, got {width}x{height}")
    rng = np.random.default_rng(seed)
    bg = _palette(rng, _value_noise(rng, height, width))
    fg = _palette(rng, _value_noise(rng, height, width))
    for _ in range(200):
        mask = _convex_mask(rng, height, width)
        if 0.1 <= mask.mean() <= 0.6:
            break
    else:
        raise RuntimeError("mask coverage never reached [0.1, 0.6]")
    d_bg = float(rng.uniform(0.05, 0.5))
    d_fg = d_bg + float(rng.uniform(0.15, 0.95 - d_bg))
    return TwoPlaneScene(fg, bg, mask.astype(np.float64), d_fg, d_bg)


# ---------------------------------------------------------------------------
# Dataset generation
# ---------------------------------------------------------------------------

def _default_df_grid():
    return tuple(round(0.05 * i, 2) for i in range(1, 21))


@dataclass
class DatasetSpec:
    scene_count: int
    K_grid: tuple = (12.0, 24.0)
    d_f_grid: tuple = field(default_factory=_default_df_grid)
    gamma_grid: tuple = (1.0, 2.0, 3.0, 4.0, 5.0)
    seed: int = 0

    def __post_init__(self):
        if self.scene_count < 1:
            raise ValueError("scene_count must be >= 1")
        if not (self.K_grid and self.d_f_grid and self.gamma_grid):
            raise ValueError("parameter grids must be nonempty")


def _num(x: float) -> str:
    return f"{x:g}"


def generate_dataset(spec: DatasetSpec, out_dir, width: int = 256, height: int = 256,
                     samples: int = DEFAULT_SAMPLES) -> dict:
    """Write scenes with their bokeh stacks and return the manifest.

    Layout: scene_####/image.png, disparity.pfm and one
    bokeh_K{K}_df{d_f}_g{gamma}.png per grid point; manifest.json at the root.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "seed": spec.seed,
        "width": width,
        "height": height,
        "samples": samples,
        "grids": {"K": list(spec.K_grid), "d_f": list(spec.d_f_grid),
                  "gamma": list(spec.gamma_grid)},
        "scenes": [],
    }
    for i in range(spec.scene_count):
        scene = generate_scene(spec.seed + i, width, height)
        sdir = out_dir / f"scene_{i:04d}"
        sdir.mkdir(exist_ok=True)
        save_image(sdir / "image.png", scene.composite())
        write_pfm(sdir / "disparity.pfm", scene.disparity())
        entry = {
            "dir": sdir.name,
            "image": f"{sdir.name}/image.png",
            "disparity": f"{sdir.name}/disparity.pfm",
            "d_fg": scene.d_fg,
            "d_bg": scene.d_bg,
            "bokeh": [],
        }
        for K in spec.K_grid:
            for d_f in spec.d_f_grid:
                for g in spec.gamma_grid:
                    name = f"bokeh_K{_num(K)}_df{_num(d_f)}_g{_num(g)}.png"
                    params = RenderParams(K=K, d_f=d_f, gamma=g)
                    save_image(sdir / name, render_oracle(scene, params, samples))
                    entry["bokeh"].append({"K": K, "d_f": d_f, "gamma": g,
                                           "path": f"{sdir.name}/{name}"})
        manifest["scenes"].append(entry)
    with open(out_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2)
    return manifest
