"""Synthetic collapsed-pillar patterns and simulated repeated measurements.

This is a stand-in generator, not a physical model of resist collapse. The
only calibration is geometric: 60 nm pillars on a 120 nm pitch filling a
2 um field, 200 nm tall, rasterized at 3.3 nm per pixel. Each pillar either
stays upright or falls over as a rigid rectangle in a uniformly random
direction. Real collapsed-resist morphology is much richer than this.

Randomness comes from numpy's PCG64. A master uses ``PCG64(seed)``; a
measurement uses ``PCG64(SeedSequence([seed, measurement_index]))``. In a
corpus, sample ``s`` uses ``seed ^ s`` for both its master and measurements.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .image import as_gray, center_crop, frame_average, translate, write_pgm

MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class PillarArraySpec:
    grid_n: int = 16
    pitch_px: int = 36
    pillar_px: int = 18
    fall_len_px: int = 61
    collapse_prob: float = 0.9
    hi_level: int = 130
    lo_level: int = 80
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.collapse_prob <= 1.0:
            raise ValueError(f"collapse_prob must be in [0, 1], got {self.collapse_prob}")
        for name in ("grid_n", "pitch_px", "pillar_px", "fall_len_px"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.pillar_px > self.pitch_px:
            raise ValueError("pillar_px must not exceed pitch_px")
        if not 0 <= self.lo_level < self.hi_level <= 255:
            raise ValueError("need 0 <= lo_level < hi_level <= 255")
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def canvas_px(self) -> int:
        return self.grid_n * self.pitch_px + 2 * self.fall_len_px


@dataclass(frozen=True)
class MeasurementModel:
    noise_sigma: float = 12.0
    jitter_px: int = 2
    frames: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.jitter_px < 0:
            raise ValueError("jitter_px must be >= 0")
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def pillar_centers(spec: PillarArraySpec) -> np.ndarray:
    """(grid_n**2, 2) array of (x, y) pillar centers in row-major pillar order."""
    pos = spec.fall_len_px + (np.arange(spec.grid_n) + 0.5) * spec.pitch_px
    xs, ys = np.meshgrid(pos, pos)
    return np.stack([xs.ravel(), ys.ravel()], axis=1)


def draw_collapse(spec: PillarArraySpec) -> tuple[np.ndarray, np.ndarray]:
    """Per-pillar collapse flags and fall directions, deterministic in ``spec.seed``."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    n = spec.grid_n**2
    collapsed = rng.random(n) < spec.collapse_prob
    theta = rng.random(n) * (2.0 * math.pi)
    return collapsed, theta


def _fill_rect(hi: np.ndarray, cx, cy, theta, width, s_lo, s_hi):
    """Set pixels whose centers lie in the rotated rectangle.

    Rectangle coordinates: ``s`` along (cos theta, sin theta) in [s_lo, s_hi),
    ``t`` across it in [-width/2, width/2), both measured from (cx, cy).
    """
    c, s = math.cos(theta), math.sin(theta)
    corners = [
        (cx + u * c - v * s, cy + u * s + v * c)
        for u in (s_lo, s_hi)
        for v in (-width / 2, width / 2)
    ]
    h, w = hi.shape
    x0 = max(int(math.floor(min(p[0] for p in corners))) - 1, 0)
    x1 = min(int(math.ceil(max(p[0] for p in corners))) + 1, w)
    y0 = max(int(math.floor(min(p[1] for p in corners))) - 1, 0)
    y1 = min(int(math.ceil(max(p[1] for p in corners))) + 1, h)
    if x0 >= x1 or y0 >= y1:
        return
    px = np.arange(x0, x1) + 0.5 - cx
    py = np.arange(y0, y1) + 0.5 - cy
    gx, gy = np.meshgrid(px, py)
    along = gx * c + gy * s
    across = -gx * s + gy * c
    inside = (along >= s_lo) & (along < s_hi) & (across >= -width / 2) & (across < width / 2)
    hi[y0:y1, x0:x1] |= inside


def generate_master(spec: PillarArraySpec) -> np.ndarray:
    """Two-level master pattern: lo background, hi wherever resist remains."""
    size = spec.canvas_px
    hi = np.zeros((size, size), dtype=bool)
    collapsed, theta = draw_collapse(spec)
    half = spec.pillar_px / 2
    for (cx, cy), fell, th in zip(pillar_centers(spec), collapsed, theta):
        if fell:
            _fill_rect(hi, cx, cy, th, spec.pillar_px, -half, spec.fall_len_px - half)
        else:
            _fill_rect(hi, cx, cy, 0.0, spec.pillar_px, -half, half)
    return np.where(hi, spec.hi_level, spec.lo_level).astype(np.uint8)


def measurement_rng(seed: int, measurement_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, measurement_index])))


def measure(master, model: MeasurementModel, measurement_index: int, size: int | None = None) -> np.ndarray:
    """One simulated capture: random integer jitter, then ``frames`` noisy frames averaged.

    ``size`` center-crops after the jitter and before the noise, which keeps
    replicated edge pixels out of the crop and saves drawing noise for
    pixels that would be discarded.
    """
    master = as_gray(master)
    rng = measurement_rng(model.seed, measurement_index)
    dx, dy = (int(v) for v in rng.integers(-model.jitter_px, model.jitter_px, size=2, endpoint=True))
    moved = translate(master, dx, dy)
    if size is not None:
        moved = center_crop(moved, size)
    if model.noise_sigma == 0:
        return moved
    base = moved.astype(np.float64)
    frames = []
    for _ in range(model.frames):
        noisy = base + rng.normal(0.0, model.noise_sigma, size=base.shape)
        frames.append(np.clip(np.floor(noisy + 0.5), 0, 255).astype(np.uint8))
    return frame_average(frames)


MANIFEST_NAME = "manifest.tsv"
MANIFEST_HEADER = ("sample_id", "measurement_id", "path", "role")


def sample_seed(seed: int, sample: int) -> int:
    return (seed ^ sample) & MASK64


def _write_sample(s: int, n_measurements: int, spec, model, out_dir: Path, size):
    sspec = replace(spec, seed=sample_seed(spec.seed, s))
    smodel = replace(model, seed=sample_seed(model.seed, s))
    master = generate_master(sspec)
    sdir = out_dir / f"s{s}"
    sdir.mkdir(parents=True, exist_ok=True)
    rows = []
    stored = center_crop(master, size) if size is not None else master
    rel = f"s{s}/master.pgm"
    write_pgm(out_dir / rel, stored)
    rows.append((str(s), "-", rel, "master"))
    for m in range(n_measurements):
        rel = f"s{s}/m{m}.pgm"
        write_pgm(out_dir / rel, measure(master, smodel, m, size))
        rows.append((str(s), str(m), rel, "measurement"))
    return rows


def generate_corpus(
    n_samples: int,
    n_measurements: int,
    spec: PillarArraySpec,
    model: MeasurementModel,
    out_dir,
    size: int | None = None,
) -> Path:
    """Write masters, measurements and ``manifest.tsv`` under ``out_dir``.

    ``size`` center-crops stored images (masters and measurements alike).
    Returns the manifest path.
    """
    if n_samples < 1 or n_measurements < 1:
        raise ValueError("need at least one sample and one measurement")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        rows = []
        for s in range(n_samples):
            rows += _write_sample(s, n_measurements, spec, model, out_dir, size)
        manifest = out_dir / MANIFEST_NAME
        with open(manifest, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
            writer.writerow(MANIFEST_HEADER)
            writer.writerows(rows)
    except OSError as exc:
        raise OSError(exc.errno, f"corpus write failed: {exc.strerror}", exc.filename or os.fspath(out_dir)) from exc
    return manifest
