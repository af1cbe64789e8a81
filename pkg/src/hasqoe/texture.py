"""Macroblock texture feature.

Each complete 16x16 macroblock is compared against the frame's row
averages, column averages, and their mean; the block's texture is the
smallest of the three absolute-difference sums. The per-frame feature is
the sum over blocks normalized by the number of included pixels, which
keeps values comparable across ladder resolutions.

All intermediate terms are scaled to a common denominator so that integer
pixel values stay exactly representable; accumulation order then cannot
change the result.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .frames import GrayFrame

__all__ = ["TextureConfig", "texture", "texture_segment"]

MACROBLOCK = 16


@dataclass(frozen=True)
class TextureConfig:
    """Macroblock side is fixed at 16; partial edge blocks are ignored."""

    block: int = MACROBLOCK

    def __post_init__(self) -> None:
        if self.block != MACROBLOCK:
            raise ValueError(f"macroblock side is fixed at {MACROBLOCK}, got {self.block}")


def texture(frame: GrayFrame, cfg: TextureConfig = TextureConfig()) -> float:
    """Per-pixel-normalized macroblock texture of one frame (>= 0)."""
    height, width = frame.height, frame.width
    if height < cfg.block or width < cfg.block:
        raise ValueError(
            f"frame {width}x{height} smaller than one {cfg.block}x{cfg.block} macroblock"
        )
    g = frame.data.astype(np.float64)
    row_sums = g.sum(axis=1)  # width * row average
    col_sums = g.sum(axis=0)  # height * column average

    # Common denominator 2*width*height: Hor and Ver terms are scaled by
    # 2*height and 2*width respectively, the diagonal term is already there.
    hor = np.abs(row_sums[:, None] - width * g)
    ver = np.abs(col_sums[None, :] - height * g)
    dia = np.abs(width * col_sums[None, :] + height * row_sums[:, None] - 2.0 * width * height * g)

    blocks_y = height // cfg.block
    blocks_x = width // cfg.block
    crop_h = blocks_y * cfg.block
    crop_w = blocks_x * cfg.block

    def block_sums(per_pixel: np.ndarray) -> np.ndarray:
        cropped = per_pixel[:crop_h, :crop_w]
        return cropped.reshape(blocks_y, cfg.block, blocks_x, cfg.block).sum(axis=(1, 3))

    scaled_min = np.minimum.reduce(
        [2.0 * height * block_sums(hor), 2.0 * width * block_sums(ver), block_sums(dia)]
    )
    included_pixels = blocks_y * blocks_x * cfg.block * cfg.block
    return float(scaled_min.sum()) / (2.0 * width * height * included_pixels)


def texture_segment(frame_textures: Sequence[float]) -> float:
    """Segment-level texture: arithmetic mean of per-frame values."""
    if len(frame_textures) == 0:
        raise ValueError("cannot average an empty texture sequence")
    return float(sum(frame_textures)) / len(frame_textures)
