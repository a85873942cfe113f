"""Tile-quantizing attacker model.

The attacker reproduces the authentic pattern only up to k x k pixel tiles,
each fabricated at one of two heights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .image import ImageError, PixelScale, as_gray


class TileLargerThanImage(ImageError):
    pass


@dataclass(frozen=True)
class CloneParams:
    k: int
    threshold: int = 90
    hi_level: int = 130
    lo_level: int = 80

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"tile size k must be >= 1, got {self.k}")
        if not 0 <= self.lo_level < self.hi_level <= 255:
            raise ValueError(
                f"need 0 <= lo_level < hi_level <= 255, got {self.lo_level}, {self.hi_level}"
            )


def make_virtual_clone(img, params: CloneParams) -> np.ndarray:
    """Replace every k x k tile (anchored at the top-left) by hi or lo level.

    A tile goes high when its mean is strictly above the threshold; partial
    tiles on the right and bottom edges average over the pixels they have.
    The comparison is done as ``sum > threshold * count`` in integers.
    """
    img = as_gray(img)
    h, w = img.shape
    k = params.k
    if k > h or k > w:
        raise TileLargerThanImage(f"tile {k}x{k} exceeds image {w}x{h}")
    # integral image gives exact per-tile sums for full and partial tiles
    integral = np.zeros((h + 1, w + 1), dtype=np.int64)
    integral[1:, 1:] = img.astype(np.int64).cumsum(0).cumsum(1)
    ys = np.minimum(np.arange(0, h + k, k), h)
    xs = np.minimum(np.arange(0, w + k, k), w)
    ys = np.unique(ys)
    xs = np.unique(xs)
    sums = (
        integral[np.ix_(ys[1:], xs[1:])]
        - integral[np.ix_(ys[:-1], xs[1:])]
        - integral[np.ix_(ys[1:], xs[:-1])]
        + integral[np.ix_(ys[:-1], xs[:-1])]
    )
    counts = np.outer(np.diff(ys), np.diff(xs))
    high = sums > params.threshold * counts
    levels = np.where(high, params.hi_level, params.lo_level).astype(np.uint8)
    return np.repeat(np.repeat(levels, np.diff(ys), axis=0), np.diff(xs), axis=1)


def tile_physical_size(k: int, scale: PixelScale = PixelScale()) -> float:
    """Side length in nm of a k-pixel tile (unrounded)."""
    if k < 1:
        raise ValueError(f"tile size k must be >= 1, got {k}")
    return k * scale.nm_per_pixel


def format_tile_size(k: int, scale: PixelScale = PixelScale()) -> str:
    nm = tile_physical_size(k, scale)
    return f"≈{math.floor(nm + 0.5)} nm"
