"""Aperture-shaped blur kernels rasterized by coverage supersampling.

A kernel at radius r is a (2*ceil(r)+1)^2 grid of texel weights, each the
fractional coverage of the texel by the aperture shape (a disc of radius r,
or a regular N-gon inscribed in that disc), normalized to sum 1.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .raster import ApertureSpec

SUPERSAMPLE = 8
RADIUS_STEP = 0.125  # kernel cache granularity in pixels


@dataclass(frozen=True)
class ApertureKernel:
    radius: float
    weights: np.ndarray  # (size, size) nonnegative, sums to 1

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def half(self) -> int:
        return self.weights.shape[0] // 2


def _coverage(radius: float, spec: ApertureSpec, size: int) -> np.ndarray:
    """Fractional coverage of each texel, estimated on an s x s subgrid."""
    half = size // 2
    s = SUPERSAMPLE
    sub = (np.arange(s) + 0.5) / s - 0.5
    centers = np.arange(-half, half + 1, dtype=np.float64)
    # all supersample coordinates along one axis, shape (size, s)
    coords = centers[:, None] + sub[None, :]
    xs = coords.reshape(1, -1)  # (1, size*s)
    ys = coords.reshape(-1, 1)  # (size*s, 1)
    if spec.blades == 0:
        inside = (xs * xs + ys * ys) <= radius * radius
    else:
        n = spec.blades
        # edge normals of the regular N-gon inscribed in the radius-r circle
        ang = spec.rotation + (2.0 * np.pi / n) * (np.arange(n) + 0.5)
        apothem = radius * np.cos(np.pi / n)
        inside = np.ones((ys.size, xs.size), dtype=bool)
        for a in ang:
            inside &= (xs * np.cos(a) + ys * np.sin(a)) <= apothem
    frac = inside.reshape(size, s, size, s).mean(axis=(1, 3))
    return frac


def build_kernel(radius: float, spec: ApertureSpec = ApertureSpec()) -> ApertureKernel:
    """Rasterize the aperture at the given real-valued radius.

    radius == 0 yields a 1x1 impulse. Radii below 0.5 blend the impulse with
    the radius-0.5 kernel (fraction 2*radius) so blur grows continuously.
    """
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    if radius == 0.0:
        return ApertureKernel(0.0, np.ones((1, 1), dtype=np.float64))
    size = 2 * int(np.ceil(radius)) + 1
    if radius < 0.5:
        base = _coverage(0.5, spec, size)
        total = base.sum()
        w = (2.0 * radius) * (base / total if total > 0 else base)
        w[size // 2, size // 2] += 1.0 - 2.0 * radius
    else:
        w = _coverage(radius, spec, size)
    total = w.sum()
    if total <= 0:
        # degenerate shape thinner than the supersampling grid; fall back to
        # an impulse so the renderer never divides by zero
        w = np.zeros((size, size), dtype=np.float64)
        w[size // 2, size // 2] = 1.0
        total = 1.0
    w = w / total
    w.setflags(write=False)
    return ApertureKernel(float(radius), w)


def snap_radius(radius: float) -> float:
    """Quantize a radius to the kernel cache grid."""
    return round(radius / RADIUS_STEP) * RADIUS_STEP


_cache: dict[tuple, ApertureKernel] = {}
_cache_lock = threading.Lock()


def cached_kernel(radius: float, spec: ApertureSpec = ApertureSpec()) -> ApertureKernel:
    """build_kernel at the snapped radius, memoized; safe for concurrent use."""
    r = snap_radius(radius)
    key = (r, spec.blades, round(spec.rotation, 9))
    k = _cache.get(key)
    if k is None:
        k = build_kernel(r, spec)
        with _cache_lock:
            _cache.setdefault(key, k)
    return k
