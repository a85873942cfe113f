"""Command-line entry point: ``synth``, ``match``, ``clone``, ``eval``.

Exit codes: 0 success, 1 data or I/O error, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .clone import CloneParams, TileLargerThanImage, format_tile_size, make_virtual_clone
from .evaluation import (
    CorpusError,
    Evaluator,
    eer,
    load_corpus,
    rate_curve,
    threshold_grid,
    write_curves,
    write_scores,
)
from .image import ImageError, PixelScale, preprocess, read_pgm, write_pgm
from .similarity import MatchParams, shifted_similarity
from .synth import MeasurementModel, PillarArraySpec, generate_corpus

OUT_ENV = "NANOARTIFACT_OUT"
DEFAULT_K = (3, 6, 9, 12, 15, 18)


class UsageError(Exception):
    pass


def _k_list(text: str) -> tuple[int, ...]:
    try:
        ks = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}")
    if not ks or min(ks) < 1:
        raise argparse.ArgumentTypeError("tile sizes must be integers >= 1")
    return ks


def _add_match_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--crop", type=int, default=512, help="center crop size in pixels (default: %(default)s)")
    p.add_argument("--window", type=int, default=11, help="median filter window (default: %(default)s)")
    p.add_argument("--threshold", "-T", type=int, default=90, help="mask intensity threshold T (default: %(default)s)")
    p.add_argument("--max-shift", type=int, default=5, help="largest axis shift searched (default: %(default)s)")
    p.add_argument("--full-grid", action="store_true", help="search the full (2s+1)^2 offset grid")
    p.add_argument("--mask-stats", action="store_true", help="take means over mask support only")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nanoartifact", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic collapsed-pillar corpus")
    p.add_argument("--samples", type=int, default=20, help="number of samples (default: %(default)s)")
    p.add_argument("--measurements", type=int, default=5, help="measurements per sample (default: %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="base RNG seed for masters and measurements (default: %(default)s)")
    p.add_argument("--out", default=None, help=f"output directory (default: ${OUT_ENV} or ./corpus)")
    p.add_argument("--size", type=int, default=None, help="center-crop stored images to this size (default: full canvas)")
    p.add_argument("--grid-n", type=int, default=16, help="pillars per side (default: %(default)s)")
    p.add_argument("--pitch", type=int, default=36, help="pillar pitch in px (default: %(default)s)")
    p.add_argument("--pillar", type=int, default=18, help="pillar side in px (default: %(default)s)")
    p.add_argument("--fall-len", type=int, default=61, help="collapsed pillar length in px (default: %(default)s)")
    p.add_argument("--collapse-prob", type=float, default=0.9, help="per-pillar collapse probability (default: %(default)s)")
    p.add_argument("--noise-sigma", type=float, default=12.0, help="per-frame Gaussian noise sigma (default: %(default)s)")
    p.add_argument("--jitter", type=int, default=2, help="max integer translation per measurement (default: %(default)s)")
    p.add_argument("--frames", type=int, default=8, help="frames averaged per measurement (default: %(default)s)")

    p = sub.add_parser("match", help="score two PGM images")
    p.add_argument("image_a")
    p.add_argument("image_b")
    p.add_argument("--raw", action="store_true", help="skip crop and median filter")
    _add_match_flags(p)

    p = sub.add_parser("clone", help="write a virtual clone of a PGM image")
    p.add_argument("image")
    p.add_argument("--k", type=int, required=True, help="tile side in pixels")
    p.add_argument("--threshold", "-T", type=int, default=90, help="tile threshold T (default: %(default)s)")
    p.add_argument("--hi", type=int, default=130, help="high level (default: %(default)s)")
    p.add_argument("--lo", type=int, default=80, help="low level (default: %(default)s)")
    p.add_argument("--nm-per-pixel", type=float, default=3.3, help="pixel scale (default: %(default)s)")

    p = sub.add_parser("eval", help="FMR/FNMR/CMR curves for a corpus")
    p.add_argument("corpus", help="corpus directory or manifest.tsv")
    p.add_argument("--out", default=None, help=f"output directory (default: ${OUT_ENV} or ./results)")
    p.add_argument("--grid", type=int, default=1001, help="threshold grid points in [0,1] (default: %(default)s)")
    p.add_argument("--clone-k", type=_k_list, default=DEFAULT_K, help="tile sizes for CMR (default: 3,6,9,12,15,18)")
    p.add_argument("--pairing", choices=("all", "reference"), default="all", help="genuine pairing scheme (default: %(default)s)")
    p.add_argument("--impostor-mode", choices=("ordered", "unordered"), default="unordered", help="(default: %(default)s)")
    p.add_argument("--workers", type=int, default=1, help="worker processes (default: %(default)s)")
    _add_match_flags(p)
    return parser


def _match_params(args) -> MatchParams:
    if args.window < 1 or args.window % 2 == 0:
        raise UsageError("--window must be odd and >= 1")
    if args.crop < 1:
        raise UsageError("--crop must be >= 1")
    try:
        return MatchParams(args.threshold, args.max_shift, args.full_grid, args.mask_stats)
    except ValueError as exc:
        raise UsageError(str(exc))


def _out_dir(value, fallback: str) -> Path:
    return Path(value or os.environ.get(OUT_ENV) or fallback)


def cmd_synth(args) -> int:
    if args.samples < 1 or args.measurements < 1:
        raise UsageError("--samples and --measurements must be >= 1")
    if args.size is not None and args.size < 1:
        raise UsageError("--size must be >= 1")
    try:
        spec = PillarArraySpec(
            args.grid_n, args.pitch, args.pillar, args.fall_len, args.collapse_prob, seed=args.seed
        )
        model = MeasurementModel(args.noise_sigma, args.jitter, args.frames, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc))
    if args.size is not None and args.size > spec.canvas_px:
        raise UsageError(f"--size {args.size} exceeds the {spec.canvas_px}px canvas")
    manifest = generate_corpus(args.samples, args.measurements, spec, model, _out_dir(args.out, "corpus"), args.size)
    print(manifest)
    return 0


def _load_pair(args):
    a, b = read_pgm(args.image_a), read_pgm(args.image_b)
    if not args.raw:
        a = preprocess(a, args.crop, args.window)
        b = preprocess(b, args.crop, args.window)
    return a, b


def cmd_match(args) -> int:
    params = _match_params(args)
    a, b = _load_pair(args)
    score = shifted_similarity(a, b, params)
    dx, dy = score.offset
    print(f"{score.value:.12f}\t{dx}\t{dy}")
    return 0


def cmd_clone(args) -> int:
    try:
        params = CloneParams(args.k, args.threshold, args.hi, args.lo)
        scale = PixelScale(args.nm_per_pixel)
    except ValueError as exc:
        raise UsageError(str(exc))
    img = read_pgm(args.image)
    try:
        clone = make_virtual_clone(img, params)
    except TileLargerThanImage as exc:
        raise UsageError(str(exc))
    src = Path(args.image)
    stem = src.name[:-4] if src.name.endswith(".pgm") else src.name
    dest = src.with_name(f"{stem}.clone.k{args.k}.pgm")
    write_pgm(dest, clone)
    print(f"{dest}\t{format_tile_size(args.k, scale)}")
    return 0


def cmd_eval(args) -> int:
    params = _match_params(args)
    if args.grid < 2:
        raise UsageError("--grid must be >= 2")
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    corpus = load_corpus(args.corpus)
    out = _out_dir(args.out, "results")
    ev = Evaluator(corpus, params, args.crop, args.window, args.workers)
    grid = threshold_grid(args.grid)
    genuine = ev.genuine(args.pairing)
    impostor = ev.impostor(args.impostor_mode)
    clones = {k: ev.clone(CloneParams(k, args.threshold)) for k in args.clone_k}
    fmr = rate_curve(impostor, grid, "above")
    fnmr = rate_curve(genuine, grid, "below")
    cmr = {k: rate_curve(s, grid, "above") for k, s in clones.items()}
    out.mkdir(parents=True, exist_ok=True)
    write_curves(out / "curves.tsv", fmr, fnmr, cmr)
    write_scores(out / "scores_genuine.txt", genuine)
    write_scores(out / "scores_impostor.txt", impostor)
    for k, s in clones.items():
        write_scores(out / f"scores_clone_k{k}.txt", s)
    t, rate = eer(fmr, fnmr)
    print(f"EER\t{rate:.9g}\tthreshold\t{t:.6f}\tgenuine\t{genuine.pair_count}\timpostor\t{impostor.pair_count}")
    return 0


COMMANDS = {"synth": cmd_synth, "match": cmd_match, "clone": cmd_clone, "eval": cmd_eval}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ImageError, CorpusError, ValueError, OSError) as exc:
        print(f"{parser.prog} {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
