"""Desk-scale analog of the FMR / FNMR / CMR evaluation.

Synthesizes a corpus, scores it, writes curves.tsv and score dumps, and prints
the zero-error band and per-k clone statistics.

    python scripts/desk_scale_fig3.py --samples 100 --measurements 10 --out runs/desk
"""

import argparse
from pathlib import Path

import numpy as np

from nanoartifact.cli import main as cli
from nanoartifact.evaluation import read_scores


def zero_band(path):
    rows = [ln.split("\t") for ln in path.read_text().splitlines()[1:]]
    best, start = 0.0, None
    for t, fmr, fnmr, *_ in rows:
        if float(fmr) == 0 and float(fnmr) == 0:
            start = float(t) if start is None else start
            best = max(best, float(t) - start)
        else:
            start = None
    return best


def run(args):
    out = Path(args.out)
    corpus, results = out / "corpus", out / "results"
    if not (corpus / "manifest.tsv").exists():
        cli(["synth", "--samples", str(args.samples), "--measurements", str(args.measurements),
             "--seed", str(args.seed), "--size", str(args.size), "--out", str(corpus)])
    ks = args.clone_k
    cli(["eval", str(corpus), "--crop", str(args.size), "--clone-k", ks,
         "--workers", str(args.workers), "--out", str(results)])
    genuine = read_scores(results / "scores_genuine.txt")
    impostor = read_scores(results / "scores_impostor.txt")
    print(f"genuine  n={genuine.size:6d} min={genuine.min():.4f} median={np.median(genuine):.4f}")
    print(f"impostor n={impostor.size:6d} max={impostor.max():.4f} median={np.median(impostor):.4f}")
    print(f"zero-error band width: {zero_band(results / 'curves.tsv'):.3f}")
    for k in ks.split(","):
        c = read_scores(results / f"scores_clone_k{k}.txt")
        print(f"clone k={k:>2}: mean={c.mean():.4f} median={np.median(c):.4f} max={c.max():.4f}")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--measurements", type=int, default=10)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--clone-k", default="1,3,6,9,12,15,18")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="runs/desk")
    run(p.parse_args())
