"""Multi-scale rendering pipeline with a bounded-radius layered core.

The core renders occlusion-aware depth-of-field for defocus values inside
[-R_hat, R_hat]. Larger blur is handled by adaptively shrinking the input so
the scaled defocus fits the core's range, then restoring resolution by
iterative 2x upsampling: each iteration re-renders from a resized guide
image where the stage defocus is in range and falls back to plain bilinear
upsampling where it had to be clipped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .classical import scatter_accumulate
from .errormap import error_map_from_defocus
from .raster import (ApertureSpec, as_image, as_scalar_map, gamma_decode,
                     gamma_encode, resize_bilinear, resize_nearest)

DEFAULT_R_HAT = 10.0
NR_MODES = ("full", "sfuse", "clip", "noclip", "bilinear")


@dataclass(frozen=True)
class CoreConfig:
    """Core range limit and the ablation switches of the upsampling loop."""

    R_hat: float = DEFAULT_R_HAT
    bilinear_only: bool = False
    disable_clip: bool = False
    use_mask: bool = True
    mask_source: str = "dilated"  # "dilated" or "signed"

    def __post_init__(self):
        if self.R_hat <= 0:
            raise ValueError(f"R_hat must be > 0, got {self.R_hat}")
        if self.mask_source not in ("dilated", "signed"):
            raise ValueError(f"unknown mask_source {self.mask_source!r}")

    @classmethod
    def from_mode(cls, mode: str, R_hat: float = DEFAULT_R_HAT) -> "CoreConfig":
        if mode == "full":
            return cls(R_hat=R_hat)
        if mode == "sfuse":
            return cls(R_hat=R_hat, mask_source="signed")
        if mode == "clip":
            return cls(R_hat=R_hat, use_mask=False)
        if mode == "noclip":
            return cls(R_hat=R_hat, use_mask=False, disable_clip=True)
        if mode == "bilinear":
            return cls(R_hat=R_hat, bilinear_only=True)
        raise ValueError(f"unknown nr mode {mode!r}, expected one of {NR_MODES}")


@dataclass(frozen=True)
class PyramidSchedule:
    """Downscale factor per upsampling iteration; factors halve to 1."""

    w0: float
    factors: tuple

    @property
    def T(self) -> int:
        return len(self.factors)


def adaptive_factor(S, R_hat: float = DEFAULT_R_HAT) -> float:
    """Range-reduction factor w0 = max(1, max|S| / R_hat).

    Dividing the defocus map by w0 (and the spatial dims with it) brings the
    scaled defocus into [-R_hat, R_hat].
    """
    if R_hat <= 0:
        raise ValueError(f"R_hat must be > 0, got {R_hat}")
    S = as_scalar_map(S)
    return max(1.0, float(np.abs(S).max()) / R_hat)


def build_schedule(w0: float) -> PyramidSchedule:
    """Halve the factor each iteration until it reaches 1 (clamped exactly)."""
    if w0 < 1.0:
        raise ValueError(f"w0 must be >= 1, got {w0}")
    factors = []
    w = float(w0)
    while w > 1.0:
        w = w / 2.0
        factors.append(max(w, 1.0))
    return PyramidSchedule(float(w0), tuple(factors))


def _hole_fill(color_sum: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Normalized layer color, smoothly extended into zero-alpha holes.

    Push-pull: holes take their color from progressively coarser copies of
    the premultiplied layer, which extends the visible content behind
    occluders (the backmost layer must be defined everywhere it can show
    through a semi-transparent blur edge).
    """
    h, w = alpha.shape
    holes = alpha <= 1e-12
    norm = color_sum / np.maximum(alpha, 1e-12)[:, :, None]
    if not holes.any():
        return norm
    if h == 1 and w == 1:
        return norm
    cw, ch = max(1, (w + 1) // 2), max(1, (h + 1) // 2)
    coarse = _hole_fill(resize_bilinear(color_sum, cw, ch),
                        resize_bilinear(alpha, cw, ch))
    up = resize_bilinear(coarse, w, h)
    return np.where(holes[:, :, None], up, norm)


def render_core_layered(img, S, gamma: float, spec: ApertureSpec = ApertureSpec(),
                        R_hat: float = DEFAULT_R_HAT, out_of_range: str = "raise") -> np.ndarray:
    """Occlusion-aware bounded-radius render.

    Pixels are grouped into unit-width defocus layers over [-R_hat, R_hat]
    and composited back to front (most negative defocus first): each layer's
    premultiplied color and occupancy are blurred with the layer's kernel
    (radius = the integer layer defocus, one kernel per layer), then blended
    over the running composite. The backmost layer is treated as an opaque
    world plane: its colors are extended into occluded holes before
    blurring, so disoccluded background behind semi-transparent blur edges
    shows a plausible continuation of the visible content. A final
    per-pixel weight normalization absorbs kernel mass lost at the frame
    boundary, matching the scattering renderer's edge handling.
    Out-of-range defocus raises by default; out_of_range="wrap" aliases the
    layer assignment instead, emulating how a bounded-range core collapses
    on unclipped input (ablation use only).
    """
    img = as_image(img)
    S = as_scalar_map(S)
    if img.shape[:2] != S.shape:
        raise ValueError(f"image {img.shape[:2]} and defocus {S.shape} dims differ")
    R = int(round(R_hat))
    n_layers = 2 * R + 1
    q = np.rint(S).astype(np.int64)
    if out_of_range == "raise":
        if float(np.abs(S).max()) > R_hat + 0.5:
            raise ValueError(
                f"defocus range [{S.min():.2f}, {S.max():.2f}] exceeds core "
                f"contract [-{R_hat}, {R_hat}]")
        q = np.clip(q, -R, R)
    elif out_of_range == "wrap":
        q = ((q + R) % n_layers) - R
    else:
        raise ValueError(f"unknown out_of_range policy {out_of_range!r}")

    lin = gamma_decode(img, gamma)
    comp_c = None
    comp_a = None
    for i, level in enumerate(np.unique(q)):  # ascending defocus = back to front
        active = q == level
        radius = float(abs(int(level)))
        layer_radii = np.full(q.shape, radius)
        if i == 0:
            # opaque world plane: extend the visible colors into the holes
            # occluded by nearer layers, blur every pixel
            act = active.astype(np.float64)
            c_ext = _hole_fill(lin * act[:, :, None], act)
            if radius == 0.0:
                c, a = c_ext, np.ones(q.shape, dtype=np.float64)
            else:
                acc = scatter_accumulate(c_ext, layer_radii, spec,
                                         active=np.ones(q.shape, dtype=np.uint8))
                c, a = acc.color_sum, acc.weight_sum
        elif radius == 0.0:
            # impulse kernel: every active pixel deposits exactly onto itself
            a = active.astype(np.float64)
            c = lin * a[:, :, None]
        else:
            acc = scatter_accumulate(lin, layer_radii, spec,
                                     active=active.astype(np.uint8))
            c, a = acc.color_sum, acc.weight_sum
        over = a > 1.0
        if np.any(over):
            c = c.copy()
            c[over] /= a[over, None]
            a = np.minimum(a, 1.0)
        if comp_c is None:
            comp_c, comp_a = c, a
        else:
            comp_c = c + (1.0 - a[:, :, None]) * comp_c
            comp_a = a + (1.0 - a) * comp_a
    return gamma_encode(comp_c / comp_a[:, :, None], gamma)


def _stage_dims(width: int, height: int, factor: float):
    return max(1, math.ceil(width / factor)), max(1, math.ceil(height / factor))


def arnet_stage(img, S, gamma: float, spec: ApertureSpec, cfg: CoreConfig,
                tau_s: float):
    """Adaptive-resize stage: low-resolution render plus its error map.

    Returns (B_lr, E_lr, w0). The input image and defocus map are shrunk by
    w0, the defocus values divided by w0, and both the render and the error
    map evaluated at that working resolution (distances and radii in
    working-resolution pixels).
    """
    img = as_image(img)
    S = as_scalar_map(S)
    w0 = adaptive_factor(S, cfg.R_hat)
    if w0 > 1.0:
        h, w = img.shape[:2]
        tw, th = _stage_dims(w, h, w0)
        img_lr = resize_bilinear(img, tw, th)
        S_lr = resize_bilinear(S, tw, th) / w0
        # the boundary geometry must keep depth steps as steps: interpolated
        # in-between defocus values would shrink the cross-boundary radii
        S_edges = resize_nearest(S, tw, th) / w0
    else:
        img_lr = img
        S_lr = S
        S_edges = S
    B_lr = render_core_layered(img_lr, S_lr, gamma, spec, cfg.R_hat)
    E_lr = error_map_from_defocus(S_edges, tau_s / w0)
    return B_lr, E_lr, w0


def dilated_defocus(mag: np.ndarray) -> np.ndarray:
    """Spatially-variant dilation: each pixel's |defocus| spreads over its
    own blur footprint, so everything inside the scatter reach of a clipped
    pixel is flagged as contaminated."""
    out = mag.copy()
    top = int(math.ceil(float(mag.max())))
    for k in range(1, top + 1):
        grp = np.where(np.ceil(mag) == k, mag, 0.0)
        if grp.any():
            out = np.maximum(out, ndimage.maximum_filter(grp, size=2 * k + 1,
                                                         mode="constant"))
    return out


def _feather(mask: np.ndarray) -> np.ndarray:
    k = np.array([0.25, 0.5, 0.25])
    out = ndimage.correlate1d(mask, k, axis=0, mode="nearest")
    return ndimage.correlate1d(out, k, axis=1, mode="nearest")


def iunet_stage(B_in, guide, S_full, gamma: float, spec: ApertureSpec,
                t: int, schedule: PyramidSchedule, cfg: CoreConfig) -> np.ndarray:
    """One guided upsampling iteration.

    The previous bokeh image is bilinearly upsampled to the guide's dims;
    where the stage defocus (full-res defocus divided by this iteration's
    factor) fits the core range, the result is replaced by a fresh render
    from the guide with the clipped defocus map. The replacement mask is
    thresholded on the dilated defocus magnitude so pixels within scatter
    reach of a clipped pixel also fall back to the upsampled image.
    """
    B_in = as_image(B_in)
    guide = as_image(guide)
    th, tw = guide.shape[:2]
    B_up = resize_bilinear(B_in, tw, th)
    if cfg.bilinear_only:
        return B_up
    w_t = schedule.factors[t - 1]
    S_t = resize_bilinear(as_scalar_map(S_full), tw, th) / w_t
    R = cfg.R_hat
    if cfg.disable_clip:
        refined = render_core_layered(guide, S_t, gamma, spec, R, out_of_range="wrap")
    else:
        refined = render_core_layered(guide, np.clip(S_t, -R, R), gamma, spec, R)
    if not cfg.use_mask:
        return refined
    mag = np.abs(S_t)
    if cfg.mask_source == "dilated":
        mag = dilated_defocus(mag)
    M = _feather((mag <= R).astype(np.float64))
    return M[:, :, None] * refined + (1.0 - M[:, :, None]) * B_up


def render_neural(img, S_full, gamma: float, spec: ApertureSpec = ApertureSpec(),
                  cfg: CoreConfig = CoreConfig(), tau_s: float | None = None):
    """Full multi-scale render: adaptive resize, then iterative upsampling.

    Returns (B_nr, E) at the input resolution; E is the working-resolution
    error map restored by bilinear upsampling. tau_s is the depth-boundary
    threshold in defocus units (callers with disparity semantics pass
    K * tau_d); by default it is derived from the defocus range.
    """
    img = as_image(img)
    S_full = as_scalar_map(S_full)
    if img.shape[:2] != S_full.shape:
        raise ValueError(f"image {img.shape[:2]} and defocus {S_full.shape} dims differ")
    if tau_s is None:
        tau_s = max(1e-6, 0.04 * float(np.abs(S_full).max()))
    B, E_lr, w0 = arnet_stage(img, S_full, gamma, spec, cfg, tau_s)
    schedule = build_schedule(w0)
    h, w = img.shape[:2]
    for t in range(1, schedule.T + 1):
        if t == schedule.T:
            tw, th = w, h
        else:
            tw, th = _stage_dims(w, h, schedule.factors[t - 1])
        guide = resize_bilinear(img, tw, th)
        B = iunet_stage(B, guide, S_full, gamma, spec, t, schedule, cfg)
    E = np.clip(resize_bilinear(E_lr, w, h), 0.0, 1.0)
    return B, E
