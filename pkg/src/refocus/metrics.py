"""Image quality metrics and forward loss values."""

from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve

PSNR_CAP = 99.0
_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_C1 = 0.01 ** 2
_SSIM_C2 = 0.03 ** 2


def _check_dims(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB against peak 1, capped at 99."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_dims(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, -10.0 * np.log10(mse))


def _gaussian_window():
    half = _SSIM_WINDOW // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-0.5 * (x / _SSIM_SIGMA) ** 2)
    k = np.outer(g, g)
    return k / k.sum()


def _to_gray(a: np.ndarray) -> np.ndarray:
    return a.mean(axis=2) if a.ndim == 3 else a


def ssim(a, b) -> float:
    """Mean structural similarity.

    11x11 Gaussian window (sigma 1.5), C1 = 0.01^2, C2 = 0.03^2 on peak 1,
    grayscale by channel mean, averaged over fully valid window positions.
    """
    a = _to_gray(np.asarray(a, dtype=np.float64))
    b = _to_gray(np.asarray(b, dtype=np.float64))
    _check_dims(a, b)
    if min(a.shape) < _SSIM_WINDOW:
        raise ValueError(f"image {a.shape} smaller than the {_SSIM_WINDOW}px SSIM window")
    k = _gaussian_window()

    def f(x):
        return fftconvolve(x, k, mode="valid")

    mu_a, mu_b = f(a), f(b)
    var_a = f(a * a) - mu_a * mu_a
    var_b = f(b * b) - mu_b * mu_b
    cov = f(a * b) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + _SSIM_C1) * (2.0 * cov + _SSIM_C2)
    den = (mu_a * mu_a + mu_b * mu_b + _SSIM_C1) * (var_a + var_b + _SSIM_C2)
    return float(np.mean(num / den))


def _l1(a, b) -> float:
    _check_dims(a, b)
    return float(np.mean(np.abs(a - b)))


def _gradient_l1(a, b) -> float:
    """L1 between forward-difference gradients, x and y terms summed."""
    _check_dims(a, b)
    dxa, dxb = np.diff(a, axis=1), np.diff(b, axis=1)
    dya, dyb = np.diff(a, axis=0), np.diff(b, axis=0)
    return float(np.mean(np.abs(dxa - dxb)) + np.mean(np.abs(dya - dyb)))


def _bce(pred, target) -> float:
    p = np.clip(np.asarray(pred, dtype=np.float64), 1e-6, 1.0 - 1e-6)
    t = np.asarray(target, dtype=np.float64)
    return float(-np.mean(t * np.log(p) + (1.0 - t) * np.log(1.0 - p)))


def loss_arnet(B, B_lr_nr, E, B_star, E_star, lambda_bce: float = 0.1) -> float:
    """Low-resolution stage loss: image and gradient L1 terms on the fused
    and intermediate images plus weighted BCE on the error map."""
    B = np.asarray(B, dtype=np.float64)
    B_lr_nr = np.asarray(B_lr_nr, dtype=np.float64)
    B_star = np.asarray(B_star, dtype=np.float64)
    return (_l1(B, B_star) + _gradient_l1(B, B_star)
            + _l1(B_lr_nr, B_star) + _gradient_l1(B_lr_nr, B_star)
            + lambda_bce * _bce(E, E_star))


def loss_iunet(B, B_nr, B_star) -> float:
    """Upsampling stage loss: image and gradient L1 on fused and intermediate images."""
    B = np.asarray(B, dtype=np.float64)
    B_nr = np.asarray(B_nr, dtype=np.float64)
    B_star = np.asarray(B_star, dtype=np.float64)
    return (_l1(B, B_star) + _gradient_l1(B, B_star)
            + _l1(B_nr, B_star) + _gradient_l1(B_nr, B_star))
