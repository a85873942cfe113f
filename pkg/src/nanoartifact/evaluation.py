"""Genuine / impostor / clone score populations and error-rate curves.

Every image is preprocessed once (center crop, median filter) and kept in
memory. Pairwise scoring can be spread over worker processes. Scores come
back in task order and are sorted before anything is written, so outputs
do not depend on the worker count.
"""

from __future__ import annotations

import csv
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np

from .clone import CloneParams, make_virtual_clone
from .image import preprocess, read_pgm
from .similarity import MatchParams, shifted_similarity
from .synth import MANIFEST_HEADER, MANIFEST_NAME


class CorpusError(ValueError):
    pass


class CorpusTooSmall(CorpusError):
    pass


class EmptyScores(ValueError):
    pass


class GridMismatch(ValueError):
    pass


@dataclass
class Sample:
    sample_id: str
    measurements: list[Path]
    master: Path | None = None


@dataclass
class Corpus:
    root: Path
    samples: list[Sample]


def load_corpus(path) -> Corpus:
    """Read ``manifest.tsv`` (``path`` may be the file or its directory)."""
    path = Path(path)
    manifest = path / MANIFEST_NAME if path.is_dir() else path
    root = manifest.parent
    if not manifest.is_file():
        raise CorpusError(f"{manifest}: manifest not found")
    with open(manifest, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh, delimiter="\t"))
    if not rows or tuple(rows[0]) != MANIFEST_HEADER:
        raise CorpusError(f"{manifest}: bad or missing header")
    samples: dict[str, Sample] = {}
    seen = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 4:
            raise CorpusError(f"{manifest}:{lineno}: expected 4 fields, got {len(row)}")
        sid, mid, rel, role = row
        if (sid, mid, role) in seen:
            raise CorpusError(f"{manifest}:{lineno}: duplicate entry for sample {sid} measurement {mid}")
        seen.add((sid, mid, role))
        img_path = root / rel
        if not img_path.is_file():
            raise CorpusError(f"{manifest}:{lineno}: missing image {img_path}")
        sample = samples.setdefault(sid, Sample(sid, []))
        if role == "master":
            sample.master = img_path
        elif role == "measurement":
            sample.measurements.append(img_path)
        else:
            raise CorpusError(f"{manifest}:{lineno}: unknown role {role!r}")
    if not samples:
        raise CorpusError(f"{manifest}: corpus is empty")
    for s in samples.values():
        if not s.measurements:
            raise CorpusError(f"{manifest}: sample {s.sample_id} has no measurements")
    return Corpus(root, list(samples.values()))


@dataclass
class ScoreSet:
    kind: str
    scores: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.size and (self.scores.min() < 0 or self.scores.max() > 1):
            raise ValueError("scores must lie in [0, 1]")

    @property
    def pair_count(self) -> int:
        return int(self.scores.size)


@dataclass
class RateCurve:
    thresholds: np.ndarray
    rates: np.ndarray


# worker-process state, installed by _init_worker
_IMAGES: list[np.ndarray] = []
_PARAMS = MatchParams()


def _init_worker(images, params):
    global _IMAGES, _PARAMS
    _IMAGES, _PARAMS = images, params


def _score_pairs(pairs):
    return [shifted_similarity(_IMAGES[i], _IMAGES[j], _PARAMS).value for i, j in pairs]


def _score_clones(jobs):
    out = []
    for i, k, level_params in jobs:
        img = _IMAGES[i]
        clone = make_virtual_clone(img, CloneParams(k, *level_params))
        out.append(shifted_similarity(clone, img, _PARAMS).value)
    return out


def _preprocess_file(args):
    path, crop, window = args
    return preprocess(read_pgm(path), crop, window)


def _chunks(seq, n):
    return [seq[i:i + n] for i in range(0, len(seq), n)]


class Evaluator:
    """Scores a corpus under fixed matching and preprocessing settings."""

    def __init__(
        self,
        corpus: Corpus,
        params: MatchParams = MatchParams(),
        crop: int | None = 512,
        window: int = 11,
        workers: int = 1,
    ):
        self.corpus = corpus
        self.params = params
        self.crop = crop
        self.window = window
        self.workers = max(1, int(workers))
        self._index: dict[Path, int] = {}
        self._images: list[np.ndarray] = []

    def _load(self, paths: Sequence[Path]) -> list[int]:
        todo = [p for p in dict.fromkeys(paths) if p not in self._index]
        if todo:
            jobs = [(p, self.crop, self.window) for p in todo]
            if self.workers > 1 and len(todo) > 1:
                with self._pool(init=False) as pool:
                    images = list(pool.map(_preprocess_file, jobs, chunksize=8))
            else:
                images = [_preprocess_file(j) for j in jobs]
            for p, img in zip(todo, images):
                self._index[p] = len(self._images)
                self._images.append(img)
        return [self._index[p] for p in paths]

    def _pool(self, init=True):
        ctx = multiprocessing.get_context("fork") if os.name == "posix" else None
        kwargs = {"max_workers": self.workers, "mp_context": ctx}
        if init:
            kwargs.update(initializer=_init_worker, initargs=(self._images, self.params))
        return ProcessPoolExecutor(**kwargs)

    def _run(self, func, jobs) -> list[float]:
        if self.workers == 1 or len(jobs) < 2:
            _init_worker(self._images, self.params)
            return func(jobs)
        size = max(1, len(jobs) // (self.workers * 8))
        with self._pool() as pool:
            return [v for part in pool.map(func, _chunks(jobs, size)) for v in part]

    def genuine(self, pairing: str = "all") -> ScoreSet:
        """Within-sample scores: all unordered pairs, or first measurement vs the rest."""
        if pairing not in ("all", "reference"):
            raise ValueError(f"unknown pairing {pairing!r}")
        pairs = []
        for s in self.corpus.samples:
            if len(s.measurements) < 2:
                raise CorpusTooSmall(f"sample {s.sample_id} has fewer than 2 measurements")
            idx = self._load(s.measurements)
            if pairing == "all":
                pairs += list(combinations(idx, 2))
            else:
                pairs += [(idx[0], j) for j in idx[1:]]
        return ScoreSet("genuine", self._run(_score_pairs, pairs))

    def representatives(self) -> list[int]:
        return self._load([s.measurements[0] for s in self.corpus.samples])

    def impostor(self, mode: str = "unordered") -> ScoreSet:
        """Cross-sample scores between first measurements; ``ordered`` counts n(n-1)."""
        if mode not in ("ordered", "unordered"):
            raise ValueError(f"unknown mode {mode!r}")
        if len(self.corpus.samples) < 2:
            raise CorpusTooSmall("impostor scores need at least 2 samples")
        reps = self.representatives()
        scores = self._run(_score_pairs, list(combinations(reps, 2)))
        if mode == "ordered":
            # similarity is exactly symmetric
            scores = [v for v in scores for _ in (0, 1)]
        return ScoreSet("impostor", scores)

    def clone(self, clone_params: CloneParams) -> ScoreSet:
        reps = self.representatives()
        levels = (clone_params.threshold, clone_params.hi_level, clone_params.lo_level)
        jobs = [(i, clone_params.k, levels) for i in reps]
        return ScoreSet(f"clone_k{clone_params.k}", self._run(_score_clones, jobs))


def genuine_scores(corpus, params=MatchParams(), **kw) -> ScoreSet:
    pairing = kw.pop("pairing", "all")
    return Evaluator(corpus, params, **kw).genuine(pairing)


def impostor_scores(corpus, params=MatchParams(), mode="unordered", **kw) -> ScoreSet:
    return Evaluator(corpus, params, **kw).impostor(mode)


def clone_scores(corpus, params, clone_params: CloneParams, **kw) -> ScoreSet:
    return Evaluator(corpus, params, **kw).clone(clone_params)


def threshold_grid(n: int = 1001) -> np.ndarray:
    """``n`` evenly spaced thresholds from 0 to 1 inclusive."""
    if n < 2:
        raise ValueError("threshold grid needs at least 2 points")
    return np.arange(n) / (n - 1)


def rate_curve(scores, thresholds, direction: str) -> RateCurve:
    """Fraction of scores strictly above (``above``) or strictly below (``below``) each threshold."""
    values = scores.scores if isinstance(scores, ScoreSet) else np.asarray(scores, dtype=np.float64)
    if values.size == 0:
        raise EmptyScores("cannot compute a rate from zero scores")
    t = np.asarray(thresholds, dtype=np.float64)
    if t.ndim != 1 or np.any(np.diff(t) <= 0):
        raise ValueError("thresholds must be strictly ascending")
    ordered = np.sort(values)
    if direction == "above":
        counts = ordered.size - np.searchsorted(ordered, t, side="right")
    elif direction == "below":
        counts = np.searchsorted(ordered, t, side="left")
    else:
        raise ValueError(f"direction must be 'above' or 'below', got {direction!r}")
    return RateCurve(t, counts / ordered.size)


def eer(fmr: RateCurve, fnmr: RateCurve) -> tuple[float, float]:
    """Threshold minimizing |FMR - FNMR| (lowest on ties) and the mean rate there."""
    if fmr.thresholds.shape != fnmr.thresholds.shape or np.any(fmr.thresholds != fnmr.thresholds):
        raise GridMismatch("FMR and FNMR curves use different threshold grids")
    i = int(np.argmin(np.abs(fmr.rates - fnmr.rates)))
    return float(fmr.thresholds[i]), float((fmr.rates[i] + fnmr.rates[i]) / 2)


def write_curves(path, fmr: RateCurve, fnmr: RateCurve, cmr: dict[int, RateCurve]) -> None:
    columns = [fmr, fnmr, *cmr.values()]
    for c in columns[1:]:
        if np.any(c.thresholds != fmr.thresholds):
            raise GridMismatch("all curves must share one threshold grid")
    header = ["threshold", "fmr", "fnmr"] + [f"cmr_k{k}" for k in cmr]
    lines = ["\t".join(header)]
    for row, t in enumerate(fmr.thresholds):
        lines.append("\t".join([f"{t:.6f}"] + [f"{c.rates[row]:.9g}" for c in columns]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_scores(path, scores: ScoreSet) -> None:
    body = "".join(f"{v:.12f}\n" for v in np.sort(scores.scores))
    Path(path).write_text(body, encoding="utf-8")


def read_scores(path) -> np.ndarray:
    return np.loadtxt(path, dtype=np.float64, ndmin=1)
