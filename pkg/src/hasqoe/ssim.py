"""Cheap structural-similarity score for inter-frame comparison.

Single-scale SSIM over non-overlapping 8x8 windows, computed after both
frames are bilinearly resized to a common working resolution: the smaller
of the two frames, further capped at 480 pixels wide (aspect preserved).
The result is clamped to [0.01, 1] because downstream penalty terms divide
by it.
"""

from __future__ import annotations

import numpy as np

from .frames import GrayFrame, resize_bilinear

__all__ = ["fast_ssim", "SSIM_FLOOR"]

WINDOW = 8
MAX_WORKING_WIDTH = 480
SSIM_FLOOR = 0.01
_C1 = (0.01 * 255.0) ** 2
_C2 = (0.03 * 255.0) ** 2


def _working_size(a: GrayFrame, b: GrayFrame) -> tuple[int, int]:
    """Common (height, width), symmetric in the argument order."""
    pick = min((a, b), key=lambda f: (f.width * f.height, f.width, f.height))
    height, width = pick.height, pick.width
    if width > MAX_WORKING_WIDTH:
        height = max(1, round(height * MAX_WORKING_WIDTH / width))
        width = MAX_WORKING_WIDTH
    return height, width


def _window_moments(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, ...]:
    height, width = x.shape
    wins_y = height // WINDOW
    wins_x = width // WINDOW
    if wins_y == 0 or wins_x == 0:
        # Frames smaller than one window: fall back to a single global window.
        shape = (1, 1, height, width)
        blocks_x_ = x.reshape(shape)
        blocks_y_ = y.reshape(shape)
    else:
        crop_h, crop_w = wins_y * WINDOW, wins_x * WINDOW
        blocks_x_ = x[:crop_h, :crop_w].reshape(wins_y, WINDOW, wins_x, WINDOW).transpose(0, 2, 1, 3)
        blocks_y_ = y[:crop_h, :crop_w].reshape(wins_y, WINDOW, wins_x, WINDOW).transpose(0, 2, 1, 3)
    mu_x = blocks_x_.mean(axis=(2, 3))
    mu_y = blocks_y_.mean(axis=(2, 3))
    ex2 = (blocks_x_ * blocks_x_).mean(axis=(2, 3))
    ey2 = (blocks_y_ * blocks_y_).mean(axis=(2, 3))
    exy = (blocks_x_ * blocks_y_).mean(axis=(2, 3))
    var_x = ex2 - mu_x * mu_x
    var_y = ey2 - mu_y * mu_y
    cov = exy - mu_x * mu_y
    return mu_x, mu_y, var_x, var_y, cov


def fast_ssim(a: GrayFrame, b: GrayFrame) -> float:
    """Structural similarity of two frames, in [0.01, 1]."""
    height, width = _working_size(a, b)
    xa = a.data.astype(np.float64)
    xb = b.data.astype(np.float64)
    if xa.shape != (height, width):
        xa = resize_bilinear(xa, height, width)
    if xb.shape != (height, width):
        xb = resize_bilinear(xb, height, width)

    mu_x, mu_y, var_x, var_y, cov = _window_moments(xa, xb)
    numerator = (2.0 * mu_x * mu_y + _C1) * (2.0 * cov + _C2)
    denominator = (mu_x * mu_x + mu_y * mu_y + _C1) * (var_x + var_y + _C2)
    score = float((numerator / denominator).mean())
    return min(1.0, max(SSIM_FLOOR, score))
