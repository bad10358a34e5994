"""Analytic error map for the classical renderer.

For each pixel the nearest pixel on the other side of a depth boundary is
located; the distance-to-blur ratio (alpha) and the blur-radius ratio across
the boundary (beta) then drive a soft error weight in [0, 1] that marks
where pixel scattering deviates from real lens rendering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange
from scipy import ndimage

from .raster import RenderParams, as_image, as_scalar_map

DEFAULT_TAU_D = 0.04
DEFAULT_DELTA1 = 4.0
DEFAULT_DELTA2 = 2.0 / 3.0


@dataclass
class BoundaryField:
    """Per pixel: distance to the nearest cross-boundary pixel and its disparity.

    distance is +inf (and other_disparity 0) where no cross-boundary pixel
    exists within the search radius.
    """

    distance: np.ndarray
    other_disparity: np.ndarray


def _sorted_offsets(radius: int):
    r = int(radius)
    dy, dx = np.mgrid[-r:r + 1, -r:r + 1]
    d2 = dy * dy + dx * dx
    keep = (d2 > 0) & (d2 <= radius * radius)
    dy, dx, d2 = dy[keep], dx[keep], d2[keep]
    # nearest first; equidistant ties go to the smaller row, then column
    order = np.lexsort((dx, dy, d2))
    return dy[order].astype(np.int32), dx[order].astype(np.int32)


@njit(cache=True, parallel=True)
def _nearest_cross(D, candidate, off_dy, off_dx, tau_d):
    H, W = D.shape
    dist = np.full((H, W), np.inf)
    dother = np.zeros((H, W))
    for y in prange(H):
        for x in range(W):
            if candidate[y, x] == 0:
                continue
            di = D[y, x]
            for t in range(off_dy.size):
                ny = y + off_dy[t]
                nx = x + off_dx[t]
                if ny < 0 or ny >= H or nx < 0 or nx >= W:
                    continue
                dj = D[ny, nx]
                if abs(dj - di) > tau_d:
                    # the depth interface sits between the two pixel centers
                    dist[y, x] = math.sqrt(off_dy[t] * off_dy[t] + off_dx[t] * off_dx[t]) - 0.5
                    dother[y, x] = dj
                    break
    return dist, dother


def boundary_field(D, tau_d: float = DEFAULT_TAU_D, search_radius: int = 16) -> BoundaryField:
    """Nearest cross-boundary pixel within search_radius, brute force.

    A pixel j is across the boundary from i when |D_j - D_i| > tau_d. A box
    min/max prefilter skips pixels with no depth contrast in reach.
    Distances are measured to the depth interface, which lies half a pixel
    inside the center-to-center distance; rasterized blur kernels reach that
    far, so the error zone stays aligned with the renderer at small radii.
    """
    D = as_scalar_map(D)
    if tau_d <= 0:
        raise ValueError(f"tau_d must be > 0, got {tau_d}")
    if search_radius < 1:
        raise ValueError(f"search_radius must be >= 1, got {search_radius}")
    size = 2 * int(search_radius) + 1
    local_max = ndimage.maximum_filter(D, size=size, mode="nearest")
    local_min = ndimage.minimum_filter(D, size=size, mode="nearest")
    candidate = ((local_max - local_min) > tau_d).astype(np.uint8)
    off_dy, off_dx = _sorted_offsets(int(search_radius))
    dist, dother = _nearest_cross(D, candidate, off_dy, off_dx, float(tau_d))
    return BoundaryField(dist, dother)


def alpha_beta(field: BoundaryField, D, params: RenderParams):
    """Boundary-geometry variables.

    alpha = l / max(r_i, r_i') and beta = min(r_i, r_i') / max(r_i, r_i'),
    with r the blur radii on both sides of the boundary. Where l is infinite
    or both radii vanish: alpha = inf, beta = 1.
    """
    D = as_scalar_map(D)
    r_i = params.K * np.abs(D - params.d_f)
    r_o = params.K * np.abs(field.other_disparity - params.d_f)
    r_hi = np.maximum(r_i, r_o)
    r_lo = np.minimum(r_i, r_o)
    undefined = ~np.isfinite(field.distance) | (r_hi == 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = np.where(undefined, np.inf, field.distance / np.where(r_hi > 0, r_hi, 1.0))
        beta = np.where(undefined, 1.0, r_lo / np.where(r_hi > 0, r_hi, 1.0))
    return alpha, beta


def error_map_initial(alpha) -> np.ndarray:
    """Hard indicator map: 1 where alpha < 1, else 0."""
    alpha = np.asarray(alpha, dtype=np.float64)
    return (alpha < 1.0).astype(np.float64)


def error_map_improved(alpha, beta, delta1: float = DEFAULT_DELTA1,
                       delta2: float = DEFAULT_DELTA2) -> np.ndarray:
    """Soft, tight error map.

    E = max(0, 1 - alpha^delta1) * (0.5 + 0.5*tanh(10*(delta2 - beta))),
    zero where alpha is infinite or beta > 1 (the latter cannot occur for
    ratios but is guarded anyway).
    """
    if delta1 <= 0:
        raise ValueError(f"delta1 must be > 0, got {delta1}")
    if not 0.0 < delta2 <= 1.0:
        raise ValueError(f"delta2 must be in (0, 1], got {delta2}")
    alpha = np.asarray(alpha, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    # alpha >= 1 already gives E = 0; clip before the power to avoid overflow
    a = np.minimum(alpha, 2.0)
    falloff = np.maximum(0.0, 1.0 - np.power(a, delta1))
    soft = 0.5 + 0.5 * np.tanh(10.0 * (delta2 - beta))
    E = falloff * soft
    E[~np.isfinite(alpha)] = 0.0
    E[beta > 1.0] = 0.0
    return np.clip(E, 0.0, 1.0)


def compute_error_map(D, params: RenderParams, tau_d: float = DEFAULT_TAU_D,
                      delta1: float = DEFAULT_DELTA1, delta2: float = DEFAULT_DELTA2) -> np.ndarray:
    """Full chain: boundary field -> (alpha, beta) -> improved error map.

    The search radius is ceil(K) + 1; beyond the maximum blur radius the map
    is identically zero, so farther pixels cannot contribute.
    """
    D = as_scalar_map(D)
    radius = max(1, int(math.ceil(params.K)) + 1)
    field = boundary_field(D, tau_d=tau_d, search_radius=radius)
    alpha, beta = alpha_beta(field, D, params)
    return error_map_improved(alpha, beta, delta1=delta1, delta2=delta2)


def error_map_from_defocus(S, tau_s: float, delta1: float = DEFAULT_DELTA1,
                           delta2: float = DEFAULT_DELTA2) -> np.ndarray:
    """Error map computed directly from a signed defocus map.

    Blur radii are |S| and the boundary threshold tau_s is in defocus units
    (K * tau_d, rescaled with the map). Used at reduced working resolutions
    where distances and radii are measured in working-resolution pixels.
    """
    S = as_scalar_map(S)
    if tau_s <= 0:
        raise ValueError(f"tau_s must be > 0, got {tau_s}")
    radius = max(1, int(math.ceil(np.abs(S).max())) + 1)
    field = boundary_field(S, tau_d=tau_s, search_radius=radius)
    # radii equal |S - 0| when S is fed through the disparity slot with
    # K = 1, d_f = 0
    alpha, beta = alpha_beta(field, S, RenderParams(K=1.0, d_f=0.0, gamma=1.0))
    return error_map_improved(alpha, beta, delta1=delta1, delta2=delta2)


def color_difference_map(a, b) -> np.ndarray:
    """Per-pixel max over channels of |a - b|."""
    a = as_image(a)
    b = as_image(b)
    if a.shape != b.shape:
        raise ValueError(f"image dims differ: {a.shape} vs {b.shape}")
    return np.abs(a - b).max(axis=2)
