"""Image quality metrics: L1 percent, PSNR, windowed SSIM.

All three expect images with values in [0, 1].
"""

from __future__ import annotations

import numpy as np

from .errors import ContractViolationError

PSNR_CAP = 100.0
SSIM_WINDOW = 8
SSIM_STRIDE = 4
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


def _check_pair(i_hat, i_gt):
    i_hat = np.asarray(i_hat, dtype=np.float64)
    i_gt = np.asarray(i_gt, dtype=np.float64)
    for name, img in (("i_hat", i_hat), ("i_gt", i_gt)):
        if img.ndim != 3 or img.size == 0:
            raise ContractViolationError(f"{name} must be a non-empty (c, h, w) array")
        if not np.all(np.isfinite(img)):
            raise ContractViolationError(f"{name} contains non-finite values")
        if img.min() < 0.0 or img.max() > 1.0:
            raise ContractViolationError(f"{name} values must lie in [0, 1]")
    if i_hat.shape != i_gt.shape:
        raise ContractViolationError(f"image shapes differ: {i_hat.shape} vs {i_gt.shape}")
    return i_hat, i_gt


def l1_metric(i_hat, i_gt) -> float:
    """Mean absolute difference, in percent."""
    a, b = _check_pair(i_hat, i_gt)
    return float(np.mean(np.abs(a - b)) * 100.0)


def psnr(i_hat, i_gt) -> float:
    """Peak signal-to-noise ratio against a unit dynamic range, capped at 100 dB."""
    a, b = _check_pair(i_hat, i_gt)
    mse = float(np.mean((a - b) ** 2))
    if mse < 1e-10:
        return PSNR_CAP
    return float(10.0 * np.log10(1.0 / mse))


def ssim(i_hat, i_gt) -> float:
    """Structural similarity over 8x8 windows at stride 4, averaged across
    windows and channels. Window moments are population statistics."""
    a, b = _check_pair(i_hat, i_gt)
    _, h, w = a.shape
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise ContractViolationError(
            f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for SSIM, got {h}x{w}"
        )
    values = []
    for c in range(a.shape[0]):
        for y in range(0, h - SSIM_WINDOW + 1, SSIM_STRIDE):
            for x in range(0, w - SSIM_WINDOW + 1, SSIM_STRIDE):
                wa = a[c, y : y + SSIM_WINDOW, x : x + SSIM_WINDOW]
                wb = b[c, y : y + SSIM_WINDOW, x : x + SSIM_WINDOW]
                mu_a = wa.mean()
                mu_b = wb.mean()
                var_a = (wa * wa).mean() - mu_a * mu_a
                var_b = (wb * wb).mean() - mu_b * mu_b
                cov = (wa * wb).mean() - mu_a * mu_b
                num = (2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)
                den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2)
                values.append(num / den)
    return float(np.mean(values))
