"""Raster primitives shared by the whole pipeline.

Images are numpy float64 arrays in [0, 1]: color rasters are (H, W, 3),
scalar rasters (disparity, defocus, error maps) are (H, W). Row-major,
top-left origin. File formats: PNG (8/16-bit) for color images, PFM
(single channel, little-endian) or 16-bit grayscale PNG for disparity.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage


@dataclass(frozen=True)
class ApertureSpec:
    """Aperture shape: blades == 0 is a circle, otherwise a regular N-gon."""

    blades: int = 0
    rotation: float = 0.0

    def __post_init__(self):
        if self.blades != 0 and self.blades < 3:
            raise ValueError(f"blades must be 0 (circle) or >= 3, got {self.blades}")


@dataclass(frozen=True)
class RenderParams:
    """User-facing rendering controls.

    K        blur scale, pixels of radius per unit of normalized disparity
    d_f      disparity of the focal plane, in [0, 1]
    gamma    transfer exponent applied before/after rendering, in [1, 5]
    aperture aperture shape for the blur kernels
    """

    K: float
    d_f: float
    gamma: float = 2.2
    aperture: ApertureSpec = field(default_factory=ApertureSpec)

    def __post_init__(self):
        if self.K < 0:
            raise ValueError(f"K must be >= 0, got {self.K}")
        if not 0.0 <= self.d_f <= 1.0:
            raise ValueError(f"d_f must be in [0, 1], got {self.d_f}")
        if not 1.0 <= self.gamma <= 5.0:
            raise ValueError(f"gamma must be in [1, 5], got {self.gamma}")


def as_image(arr) -> np.ndarray:
    """Validate and convert to a (H, W, 3) float64 color raster."""
    img = np.asarray(arr, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) color raster, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"degenerate image dims {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    return img


def as_scalar_map(arr) -> np.ndarray:
    """Validate and convert to a (H, W) float64 scalar raster."""
    m = np.asarray(arr, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected (H, W) scalar raster, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("raster contains non-finite values")
    return m


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------

def load_image(path) -> np.ndarray:
    """Load an 8-bit RGB/gray or 16-bit gray PNG as a float64 image in [0, 1].

    Grayscale inputs are replicated to 3 channels. Raises FileNotFoundError
    for missing files and ValueError for unsupported modes (palette, alpha,
    16-bit color).
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(str(path))
    with Image.open(path) as im:
        mode = im.mode
        if mode == "RGB":
            data = np.asarray(im, dtype=np.float64) / 255.0
        elif mode == "L":
            g = np.asarray(im, dtype=np.float64) / 255.0
            data = np.stack([g, g, g], axis=-1)
        elif mode in ("I", "I;16"):
            g = np.asarray(im, dtype=np.float64) / 65535.0
            data = np.stack([g, g, g], axis=-1)
        else:
            raise ValueError(f"unsupported PNG mode {mode!r} in {path}")
    return as_image(data)


def save_image(path, img) -> None:
    """Save a color raster as an 8-bit RGB PNG (values clipped to [0, 1])."""
    img = as_image(img)
    q = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(q, "RGB").save(Path(path), format="PNG")


def load_disparity(path) -> np.ndarray:
    """Load a disparity map from PFM or 16-bit grayscale PNG.

    PFM values are returned as stored; 16-bit PNG values are scaled by
    1/65535. No normalization is applied (see normalize_disparity).
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(str(path))
    if path.suffix.lower() == ".pfm":
        return read_pfm(path)
    with Image.open(path) as im:
        if im.mode in ("I", "I;16"):
            data = np.asarray(im, dtype=np.float64) / 65535.0
        elif im.mode == "L":
            data = np.asarray(im, dtype=np.float64) / 255.0
        else:
            raise ValueError(f"disparity PNG must be single channel, got mode {im.mode!r}")
    return as_scalar_map(data)


def save_disparity(path, d) -> None:
    """Save a scalar raster as single-channel PFM."""
    write_pfm(path, d)


def read_pfm(path) -> np.ndarray:
    """Read a single-channel little-endian PFM (bottom-up row order)."""
    with open(path, "rb") as f:
        header = f.readline().rstrip()
        if header == b"PF":
            raise ValueError(f"{path}: color PFM not supported, expected single channel 'Pf'")
        if header != b"Pf":
            raise ValueError(f"{path}: not a PFM file (header {header!r})")
        dims = f.readline().decode("ascii")
        m = re.match(r"^\s*(\d+)\s+(\d+)\s*$", dims)
        if not m:
            raise ValueError(f"{path}: malformed PFM dimensions {dims!r}")
        w, h = int(m.group(1)), int(m.group(2))
        scale = float(f.readline().decode("ascii").strip())
        dtype = "<f4" if scale < 0 else ">f4"
        raw = np.frombuffer(f.read(w * h * 4), dtype=dtype)
        if raw.size != w * h:
            raise ValueError(f"{path}: truncated PFM payload")
    data = raw.reshape(h, w)[::-1].astype(np.float64)
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{path}: PFM contains non-finite values")
    return data


def write_pfm(path, d) -> None:
    """Write a scalar raster as little-endian PFM with scale line '-1.0'."""
    d = as_scalar_map(d)
    h, w = d.shape
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{w} {h}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(d[::-1].astype("<f4").tobytes())


# ---------------------------------------------------------------------------
# Disparity and defocus
# ---------------------------------------------------------------------------

def normalize_disparity(d) -> np.ndarray:
    """Affinely map [min, max] onto [0, 1]. A constant map becomes all zeros."""
    d = as_scalar_map(d)
    lo, hi = float(d.min()), float(d.max())
    if hi - lo == 0.0:
        return np.zeros_like(d)
    return (d - lo) / (hi - lo)


def signed_defocus(d, params: RenderParams) -> np.ndarray:
    """Per-pixel signed defocus S = K * (D - d_f), in pixels of blur radius."""
    d = as_scalar_map(d)
    return params.K * (d - params.d_f)


# ---------------------------------------------------------------------------
# Resampling
# ---------------------------------------------------------------------------

def _axis_lerp_indices(n_in: int, n_out: int):
    # Half-pixel-center alignment with edge clamping; exact identity when
    # n_in == n_out.
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    t = src - i0
    return i0, i1, t


def resize_nearest(arr, new_width: int, new_height: int) -> np.ndarray:
    """Nearest-neighbor resize with half-pixel-center alignment.

    Keeps value sets intact (no interpolated in-betweens), which matters for
    step-like rasters such as quantized disparity at depth boundaries.
    """
    if new_width < 1 or new_height < 1:
        raise ValueError(f"target dims must be >= 1, got {new_width}x{new_height}")
    a = np.asarray(arr, dtype=np.float64)
    h, w = a.shape[:2]
    ys = np.clip(np.rint((np.arange(new_height) + 0.5) * (h / new_height) - 0.5), 0, h - 1).astype(np.intp)
    xs = np.clip(np.rint((np.arange(new_width) + 0.5) * (w / new_width) - 0.5), 0, w - 1).astype(np.intp)
    return a[ys][:, xs].copy()


def resize_bilinear(arr, new_width: int, new_height: int) -> np.ndarray:
    """Bilinear resize with half-pixel centers and edge clamping.

    Works on (H, W) and (H, W, C) rasters. Exact on constant inputs and an
    identity when the target dims equal the source dims.
    """
    if new_width < 1 or new_height < 1:
        raise ValueError(f"target dims must be >= 1, got {new_width}x{new_height}")
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim not in (2, 3):
        raise ValueError(f"expected 2D or 3D raster, got shape {a.shape}")
    h, w = a.shape[:2]
    if (w, h) == (new_width, new_height):
        return a.copy()
    y0, y1, ty = _axis_lerp_indices(h, new_height)
    x0, x1, tx = _axis_lerp_indices(w, new_width)
    ty = ty.reshape(-1, *([1] * (a.ndim - 1)))
    rows = a[y0] * (1.0 - ty) + a[y1] * ty
    tx = tx.reshape(1, -1, *([1] * (a.ndim - 2)))
    return rows[:, x0] * (1.0 - tx) + rows[:, x1] * tx


# ---------------------------------------------------------------------------
# Filtering and morphology
# ---------------------------------------------------------------------------

def gaussian_blur(raster, sigma: float) -> np.ndarray:
    """Separable Gaussian blur, kernel truncated at 3*sigma and renormalized.

    Edge-clamped. sigma == 0 is the identity.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    a = np.asarray(raster, dtype=np.float64)
    if sigma == 0.0:
        return a.copy()
    radius = int(np.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    k /= k.sum()
    out = ndimage.correlate1d(a, k, axis=0, mode="nearest")
    out = ndimage.correlate1d(out, k, axis=1, mode="nearest")
    return out


def _square_filter(raster, k: int, func):
    if k < 1 or k % 2 == 0:
        raise ValueError(f"kernel size must be odd and >= 1, got {k}")
    a = np.asarray(raster, dtype=np.float64)
    size = (k, k) + (1,) * (a.ndim - 2)
    return func(a, size=size, mode="nearest")


def dilate(raster, k: int) -> np.ndarray:
    """Max filter with a k x k square structuring element, edge-clamped."""
    return _square_filter(raster, k, ndimage.maximum_filter)


def erode(raster, k: int) -> np.ndarray:
    """Min filter with a k x k square structuring element, edge-clamped."""
    return _square_filter(raster, k, ndimage.minimum_filter)


# ---------------------------------------------------------------------------
# Transfer function
# ---------------------------------------------------------------------------

def gamma_decode(img, gamma: float) -> np.ndarray:
    """Intensity -> pseudo-irradiance: raise to the power gamma."""
    a = np.asarray(img, dtype=np.float64)
    if gamma == 1.0:
        return a.copy()
    return np.power(np.maximum(a, 0.0), gamma)


def gamma_encode(img, gamma: float) -> np.ndarray:
    """Pseudo-irradiance -> intensity: raise to the power 1/gamma."""
    a = np.asarray(img, dtype=np.float64)
    if gamma == 1.0:
        return a.copy()
    return np.power(np.maximum(a, 0.0), 1.0 / gamma)
