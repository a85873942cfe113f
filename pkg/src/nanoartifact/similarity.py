"""Masked Pearson correlation with a small translation search.

Two images are compared on the pixels where either of them is "high"
(brighter than an intensity threshold); everything else is zeroed. The
correlation is evaluated at a set of integer offsets and the best clamped
value is the similarity.

All sums are taken over integer pixel values and are exact (int64 in the
shift kernel, float64 dot products below 2**53 for explicit masks); the
covariance terms are finished in Python integers. Scores are therefore
bit-reproducible, independent of summation order, and exactly symmetric
in (A, B).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .image import DimensionMismatch, ImageError, as_gray


class ImageTooSmall(ImageError):
    pass


@dataclass(frozen=True)
class MatchParams:
    threshold: int = 90
    max_shift: int = 5
    # axis-aligned offsets only unless full_grid is set
    full_grid: bool = False
    # statistics over mask support instead of over all pixels of the zero-filled images
    mask_stats: bool = False

    def __post_init__(self):
        if not 0 <= self.threshold <= 255:
            raise ValueError(f"threshold must be in 0..255, got {self.threshold}")
        if self.max_shift < 0:
            raise ValueError(f"max_shift must be >= 0, got {self.max_shift}")


@dataclass(frozen=True)
class SimilarityScore:
    value: float
    offset: tuple[int, int]
    degenerate: bool = False


def build_mask(a, b, threshold: int = 90) -> np.ndarray:
    """Boolean mask, True where ``a > threshold`` or ``b > threshold``."""
    a = as_gray(a)
    b = as_gray(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"image shapes differ: {a.shape} vs {b.shape}")
    return (a > threshold) | (b > threshold)


def _moments(a: np.ndarray, b: np.ndarray, mask: np.ndarray):
    am = np.where(mask, a, 0).astype(np.float64).ravel()
    bm = np.where(mask, b, 0).astype(np.float64).ravel()
    return (
        int(am.sum()),
        int(bm.sum()),
        int(am @ am),
        int(bm @ bm),
        int(am @ bm),
    )


def _pearson_from_moments(n: int, sa: int, sb: int, saa: int, sbb: int, sab: int):
    if n == 0:
        return None
    var_a = n * saa - sa * sa
    var_b = n * sbb - sb * sb
    if var_a == 0 or var_b == 0:
        return None
    cov = n * sab - sa * sb
    r = cov / math.sqrt(var_a * var_b)
    return max(-1.0, min(1.0, r))


def masked_pearson(a, b, mask, mask_stats: bool = False) -> float | None:
    """Pearson correlation of the masked images ``mask*a`` and ``mask*b``.

    Means run over every pixel of the zero-filled images (or over the mask
    support when ``mask_stats``). Returns ``None`` when either masked image
    has zero variance.
    """
    a = as_gray(a)
    b = as_gray(b)
    mask = np.asarray(mask, dtype=bool)
    if a.shape != b.shape or a.shape != mask.shape:
        raise DimensionMismatch(f"shapes differ: {a.shape}, {b.shape}, {mask.shape}")
    n = int(mask.sum()) if mask_stats else a.size
    return _pearson_from_moments(n, *_moments(a, b, mask))


def offsets(max_shift: int, full_grid: bool = False) -> list[tuple[int, int]]:
    """Candidate (dx, dy) offsets; (0, 0) first."""
    out = [(0, 0)]
    if full_grid:
        out += [
            (dx, dy)
            for dy in range(-max_shift, max_shift + 1)
            for dx in range(-max_shift, max_shift + 1)
            if (dx, dy) != (0, 0)
        ]
    else:
        for d in range(1, max_shift + 1):
            out += [(-d, 0), (d, 0), (0, -d), (0, d)]
    return out


def _overlap(length: int, shift: int) -> tuple[slice, slice]:
    if shift >= 0:
        return slice(shift, length), slice(0, length - shift)
    return slice(0, length + shift), slice(-shift, length)


def overlap_views(a: np.ndarray, b: np.ndarray, dx: int, dy: int):
    """Views of ``a`` and ``b`` over their overlap when B is moved by (dx, dy).

    Pixel ``a[y, x]`` is paired with ``b[y - dy, x - dx]``.
    """
    h, w = a.shape
    ra, rb = _overlap(h, dy)
    ca, cb = _overlap(w, dx)
    return a[ra, ca], b[rb, cb]


@numba.njit(cache=True, nogil=True)
def shifted_moments(a, b, dx, dy, threshold):
    """Overlap size, mask count and the five masked sums for B moved by (dx, dy)."""
    h, w = a.shape
    y0, y1 = max(dy, 0), min(h, h + dy)
    x0, x1 = max(dx, 0), min(w, w + dx)
    sa = sb = saa = sbb = sab = count = 0
    for y in range(y0, y1):
        for x in range(x0, x1):
            p = np.int64(a[y, x])
            q = np.int64(b[y - dy, x - dx])
            m = np.int64((p > threshold) | (q > threshold))
            p *= m
            q *= m
            sa += p
            sb += q
            saa += p * p
            sbb += q * q
            sab += p * q
            count += m
    return (y1 - y0) * (x1 - x0), count, sa, sb, saa, sbb, sab


def correlation_at(a, b, dx: int, dy: int, params: MatchParams = MatchParams()) -> float | None:
    """Raw masked correlation with B moved by (dx, dy); ``None`` if degenerate."""
    size, count, *sums = shifted_moments(a, b, dx, dy, params.threshold)
    n = count if params.mask_stats else size
    return _pearson_from_moments(int(n), *(int(v) for v in sums))


def shifted_similarity(a, b, params: MatchParams = MatchParams()) -> SimilarityScore:
    """Best clamped masked correlation over the offset set.

    The returned offset is the (dx, dy) by which B was moved; if B is A moved
    three pixels right, the best offset is (-3, 0).
    """
    a = np.ascontiguousarray(as_gray(a))
    b = np.ascontiguousarray(as_gray(b))
    if a.shape != b.shape:
        raise DimensionMismatch(f"image shapes differ: {a.shape} vs {b.shape}")
    h, w = a.shape
    if min(h, w) <= 2 * params.max_shift:
        raise ImageTooSmall(
            f"{w}x{h} image too small for max_shift={params.max_shift}"
        )
    best = -1.0
    best_offset = (0, 0)
    all_degenerate = True
    for dx, dy in offsets(params.max_shift, params.full_grid):
        r = correlation_at(a, b, dx, dy, params)
        if r is None:
            r = 0.0
        else:
            all_degenerate = False
            r = max(r, 0.0)
        if r > best:
            best, best_offset = r, (dx, dy)
    return SimilarityScore(best, best_offset, all_degenerate)
