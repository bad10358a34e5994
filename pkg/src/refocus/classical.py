"""Scattering-based renderer plus a convolution gather oracle.

Each source pixel spreads unit energy over its aperture footprint (radius =
|signed defocus|); accumulated color is divided by accumulated weight, so
constant-color regions and the frame mean are preserved. Work is split into
a fixed number of horizontal source bands with private accumulators merged
in band order, which makes the output independent of thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange
from scipy.signal import fftconvolve

from . import aperture
from .raster import ApertureSpec, RenderParams, as_image, as_scalar_map, gamma_decode, gamma_encode

N_BANDS = 16


def blur_radius(d, params: RenderParams):
    """Blur radius r = K * |d - d_f| for a disparity value or raster."""
    return params.K * np.abs(np.asarray(d, dtype=np.float64) - params.d_f)


@dataclass
class ScatterAccumulator:
    """Unnormalized scatter totals: color_sum (H, W, 3) and weight_sum (H, W)."""

    color_sum: np.ndarray
    weight_sum: np.ndarray

    def resolve(self) -> np.ndarray:
        """color_sum / weight_sum; weight_sum must be positive everywhere."""
        return self.color_sum / self.weight_sum[:, :, None]


@njit(cache=True, parallel=True, fastmath=True)
def _scatter_bands(img, active, kidx, tap_dy, tap_dx, tap_w, start, count, halfs,
                   y_lo, y_hi, n_bands, band_rows, margin):
    H, W = kidx.shape
    partial = np.zeros((n_bands, band_rows + 2 * margin, W, 4), dtype=np.float64)
    for b in prange(n_bands):
        y0 = y_lo + b * band_rows
        y1 = min(y0 + band_rows, y_hi)
        base = y0 - margin
        for y in range(y0, y1):
            for x in range(W):
                if active[y, x] == 0:
                    continue
                k = kidx[y, x]
                h = halfs[k]
                s0 = start[k]
                n = count[k]
                c0 = img[y, x, 0]
                c1 = img[y, x, 1]
                c2 = img[y, x, 2]
                if y - h >= 0 and y + h < H and x - h >= 0 and x + h < W:
                    for t in range(s0, s0 + n):
                        ty = y + tap_dy[t] - base
                        tx = x + tap_dx[t]
                        w = tap_w[t]
                        partial[b, ty, tx, 0] += w * c0
                        partial[b, ty, tx, 1] += w * c1
                        partial[b, ty, tx, 2] += w * c2
                        partial[b, ty, tx, 3] += w
                else:
                    for t in range(s0, s0 + n):
                        gy = y + tap_dy[t]
                        gx = x + tap_dx[t]
                        if gy < 0 or gy >= H or gx < 0 or gx >= W:
                            continue
                        w = tap_w[t]
                        partial[b, gy - base, gx, 0] += w * c0
                        partial[b, gy - base, gx, 1] += w * c1
                        partial[b, gy - base, gx, 2] += w * c2
                        partial[b, gy - base, gx, 3] += w
    return partial


def _tap_bank(radii: np.ndarray, spec: ApertureSpec):
    """Flatten the nonzero taps of every kernel used by a radius raster.

    Radii are quantized to the kernel cache grid; returns the per-pixel
    kernel index plus concatenated (dy, dx, w) tap arrays.
    """
    q = np.rint(np.abs(radii) / aperture.RADIUS_STEP).astype(np.int64)
    uniq, kidx = np.unique(q, return_inverse=True)
    kidx = kidx.reshape(radii.shape).astype(np.int32)
    dys, dxs, ws, starts, counts, halfs = [], [], [], [], [], []
    pos = 0
    for u in uniq:
        kern = aperture.cached_kernel(u * aperture.RADIUS_STEP, spec)
        half = kern.half
        iy, ix = np.nonzero(kern.weights)
        dys.append((iy - half).astype(np.int32))
        dxs.append((ix - half).astype(np.int32))
        ws.append(kern.weights[iy, ix])
        starts.append(pos)
        counts.append(iy.size)
        halfs.append(half)
        pos += iy.size
    return (kidx, np.concatenate(dys), np.concatenate(dxs), np.concatenate(ws),
            np.asarray(starts, dtype=np.int64), np.asarray(counts, dtype=np.int64),
            np.asarray(halfs, dtype=np.int64))


def scatter_accumulate(img_linear: np.ndarray, radii: np.ndarray, spec: ApertureSpec,
                       active: np.ndarray | None = None) -> ScatterAccumulator:
    """Scatter every active pixel of a linear-light image by its own radius.

    Only source rows containing active pixels are processed; the band
    partition over those rows is fixed, so results stay independent of
    thread count.
    """
    H, W = radii.shape
    color_sum = np.zeros((H, W, 3), dtype=np.float64)
    weight_sum = np.zeros((H, W), dtype=np.float64)
    if active is None:
        active = np.ones((H, W), dtype=np.uint8)
        y_lo, y_hi = 0, H
    else:
        rows = np.nonzero(active.any(axis=1))[0]
        if rows.size == 0:
            return ScatterAccumulator(color_sum, weight_sum)
        y_lo, y_hi = int(rows[0]), int(rows[-1]) + 1
    kidx, tap_dy, tap_dx, tap_w, start, count, halfs = _tap_bank(radii, spec)
    margin = int(halfs.max())
    span = y_hi - y_lo
    n_bands = min(N_BANDS, span)
    band_rows = (span + n_bands - 1) // n_bands
    partial = _scatter_bands(np.ascontiguousarray(img_linear), active.astype(np.uint8),
                             kidx, tap_dy, tap_dx, tap_w, start, count, halfs,
                             y_lo, y_hi, n_bands, band_rows, margin)
    for b in range(n_bands):
        y0 = y_lo + b * band_rows
        y1 = min(y0 + band_rows, y_hi)
        if y0 >= y_hi:
            break
        lo = max(0, y0 - margin)
        hi = min(H, y1 + margin)
        base = y0 - margin
        color_sum[lo:hi] += partial[b, lo - base:hi - base, :, :3]
        weight_sum[lo:hi] += partial[b, lo - base:hi - base, :, 3]
    return ScatterAccumulator(color_sum, weight_sum)


def render_scatter(img, S, gamma: float, spec: ApertureSpec = ApertureSpec()) -> np.ndarray:
    """Classical scattering render of an image under a signed defocus map."""
    img = as_image(img)
    S = as_scalar_map(S)
    if img.shape[:2] != S.shape:
        raise ValueError(f"image {img.shape[:2]} and defocus {S.shape} dims differ")
    lin = gamma_decode(img, gamma)
    acc = scatter_accumulate(lin, np.abs(S), spec)
    return gamma_encode(acc.resolve(), gamma)


def render_gather_uniform(img, radius: float, gamma: float,
                          spec: ApertureSpec = ApertureSpec()) -> np.ndarray:
    """Gather oracle: normalized convolution with one aperture kernel.

    Equals render_scatter whenever the defocus map is constant. Kept on an
    independent code path (FFT convolution) so the two can cross-check.
    """
    img = as_image(img)
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    kern = aperture.cached_kernel(radius, spec)
    if kern.size == 1:
        return img.copy()
    lin = gamma_decode(img, gamma)
    den = fftconvolve(np.ones(img.shape[:2]), kern.weights, mode="same")
    out = np.empty_like(lin)
    for c in range(3):
        out[:, :, c] = fftconvolve(lin[:, :, c], kern.weights, mode="same") / den
    return gamma_encode(out, gamma)
