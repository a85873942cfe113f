import shutil

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nanoartifact.clone import CloneParams
from nanoartifact.evaluation import (
    CorpusError,
    CorpusTooSmall,
    EmptyScores,
    Evaluator,
    GridMismatch,
    RateCurve,
    ScoreSet,
    clone_scores,
    eer,
    genuine_scores,
    impostor_scores,
    load_corpus,
    rate_curve,
    read_scores,
    threshold_grid,
    write_curves,
    write_scores,
)
from nanoartifact.similarity import MatchParams
from nanoartifact.synth import MeasurementModel, PillarArraySpec, generate_corpus

from .oracles import naive_rate

CROP = 96


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    generate_corpus(4, 3, PillarArraySpec(grid_n=5, seed=1), MeasurementModel(seed=1), root, size=CROP)
    return load_corpus(root)


def test_load_corpus(small_corpus):
    assert [s.sample_id for s in small_corpus.samples] == ["0", "1", "2", "3"]
    assert all(len(s.measurements) == 3 and s.master is not None for s in small_corpus.samples)
    assert small_corpus.samples[0].measurements[0].name == "m0.pgm"


def test_load_corpus_errors(tmp_path, small_corpus):
    with pytest.raises(CorpusError, match="manifest"):
        load_corpus(tmp_path)
    (tmp_path / "manifest.tsv").write_text("sample_id\tmeasurement_id\tpath\trole\n")
    with pytest.raises(CorpusError, match="empty"):
        load_corpus(tmp_path)
    bad = tmp_path / "dup"
    shutil.copytree(small_corpus.root, bad)
    text = (bad / "manifest.tsv").read_text()
    (bad / "manifest.tsv").write_text(text + text.splitlines()[2] + "\n")
    with pytest.raises(CorpusError, match="duplicate"):
        load_corpus(bad)
    (bad / "manifest.tsv").write_text(text)
    (bad / "s1" / "m1.pgm").unlink()
    with pytest.raises(CorpusError, match="missing"):
        load_corpus(bad)


def test_genuine_counts_and_pairing(small_corpus):
    ev = Evaluator(small_corpus, crop=CROP)
    assert ev.genuine().pair_count == 4 * 3
    assert ev.genuine("reference").pair_count == 4 * 2


def test_genuine_duplicate_measurements_score_one(tmp_path, small_corpus):
    src = small_corpus.samples[0].measurements[0]
    lines = ["sample_id\tmeasurement_id\tpath\trole"]
    for s in range(2):
        for m in range(3):
            rel = f"d{s}_{m}.pgm"
            shutil.copy(src, tmp_path / rel)
            lines.append(f"{s}\t{m}\t{rel}\tmeasurement")
    (tmp_path / "manifest.tsv").write_text("\n".join(lines) + "\n")
    scores = genuine_scores(load_corpus(tmp_path), crop=CROP)
    assert scores.pair_count == 6
    assert np.all(scores.scores == pytest.approx(1.0, abs=1e-12))


def test_genuine_needs_two_measurements(tmp_path):
    generate_corpus(2, 1, PillarArraySpec(grid_n=3), MeasurementModel(), tmp_path, size=64)
    with pytest.raises(CorpusTooSmall):
        genuine_scores(load_corpus(tmp_path), crop=64)


def test_impostor_modes(small_corpus):
    ev = Evaluator(small_corpus, crop=CROP)
    un = ev.impostor("unordered")
    od = ev.impostor("ordered")
    assert un.pair_count == 6 and od.pair_count == 12
    grid = threshold_grid(101)
    assert np.array_equal(rate_curve(un, grid, "above").rates, rate_curve(od, grid, "above").rates)


def test_impostor_needs_two_samples(tmp_path):
    generate_corpus(1, 2, PillarArraySpec(grid_n=3), MeasurementModel(), tmp_path, size=64)
    with pytest.raises(CorpusTooSmall):
        impostor_scores(load_corpus(tmp_path), crop=64)


def test_clone_k1_on_noiseless_masters_is_one(tmp_path):
    generate_corpus(3, 2, PillarArraySpec(grid_n=5, seed=2), MeasurementModel(0, 0, 1), tmp_path, size=CROP)
    corpus = load_corpus(tmp_path)
    scores = clone_scores(corpus, MatchParams(), CloneParams(1), crop=CROP, window=1)
    assert scores.pair_count == 3
    assert np.all(scores.scores == pytest.approx(1.0, abs=1e-12))


def test_clone_all_low_is_degenerate_zero(small_corpus):
    # threshold 200 keeps every tile low: the clone is flat and the mask empty
    scores = clone_scores(small_corpus, MatchParams(threshold=200), CloneParams(CROP, threshold=200), crop=CROP)
    assert np.all(scores.scores == 0.0)


def test_parallel_matches_sequential(small_corpus):
    seq = Evaluator(small_corpus, crop=CROP, workers=1)
    par = Evaluator(small_corpus, crop=CROP, workers=3)
    assert np.array_equal(seq.genuine().scores, par.genuine().scores)
    assert np.array_equal(seq.impostor().scores, par.impostor().scores)
    assert np.array_equal(seq.clone(CloneParams(3)).scores, par.clone(CloneParams(3)).scores)


def test_rate_curve_examples():
    grid = np.array([0.5])
    assert rate_curve([0.2, 0.8], grid, "above").rates[0] == 0.5
    same = rate_curve([0.3, 0.3, 0.3], [0.3], "above")
    assert same.rates[0] == 0.0
    assert rate_curve([0.3, 0.3, 0.3], [0.3], "below").rates[0] == 0.0
    assert rate_curve([0.0, 0.4], [-0.001, 0.0], "above").rates.tolist() == [1.0, 0.5]


def test_rate_worked_example():
    n = 2383 * 2382
    scores = np.zeros(n)
    scores[0] = 0.5
    curve = rate_curve(scores, [0.1], "above")
    assert curve.rates[0] == 1 / n
    assert curve.rates[0] == pytest.approx(1.76e-7, rel=5e-3)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=60), st.sampled_from(["above", "below"]))
def test_rate_curve_matches_oracle_and_is_monotone(scores, direction):
    grid = threshold_grid(51)
    curve = rate_curve(scores, grid, direction)
    want = [naive_rate(scores, t, direction) for t in grid]
    assert np.array_equal(curve.rates, want)
    steps = np.diff(curve.rates)
    assert np.all(steps <= 0) if direction == "above" else np.all(steps >= 0)


def test_rate_curve_errors():
    with pytest.raises(EmptyScores):
        rate_curve([], [0.5], "above")
    with pytest.raises(ValueError):
        rate_curve([0.1], [0.5, 0.5], "above")
    with pytest.raises(ValueError):
        rate_curve([0.1], [0.5], "sideways")


def test_threshold_grid():
    g = threshold_grid()
    assert g.size == 1001 and g[0] == 0.0 and g[-1] == 1.0
    assert g[500] == 0.5


def brute_eer(fmr, fnmr, t):
    best = None
    for i in range(len(t)):
        d = abs(fmr[i] - fnmr[i])
        if best is None or d < best[0]:
            best = (d, t[i], (fmr[i] + fnmr[i]) / 2)
    return best[1], best[2]


def test_eer_examples():
    t = np.linspace(0, 1, 11)
    zero = RateCurve(t, np.zeros(11))
    assert eer(zero, zero) == (0.0, 0.0)
    flat = RateCurve(t, np.full(11, 0.25))
    assert eer(flat, flat) == (0.0, 0.25)
    fmr = RateCurve(t, np.linspace(1, 0, 11))
    fnmr = RateCurve(t, np.linspace(0, 1, 11) ** 2)
    assert eer(fmr, fnmr) == brute_eer(fmr.rates, fnmr.rates, t)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=40), st.lists(st.floats(0, 1), min_size=1, max_size=40))
def test_eer_matches_scan(impostor, genuine):
    t = threshold_grid(21)
    fmr = rate_curve(impostor, t, "above")
    fnmr = rate_curve(genuine, t, "below")
    assert eer(fmr, fnmr) == brute_eer(fmr.rates, fnmr.rates, t)


def test_eer_grid_mismatch():
    with pytest.raises(GridMismatch):
        eer(RateCurve(np.array([0.0, 1.0]), np.zeros(2)), RateCurve(np.array([0.0, 0.5]), np.zeros(2)))


def test_output_formats(tmp_path):
    grid = threshold_grid(3)
    fmr = rate_curve([0.1, 0.2, 0.6], grid, "above")
    fnmr = rate_curve([0.9, 0.95], grid, "below")
    cmr = {3: rate_curve([0.3], grid, "above"), 15: rate_curve([0.05], grid, "above")}
    write_curves(tmp_path / "c.tsv", fmr, fnmr, cmr)
    lines = (tmp_path / "c.tsv").read_text().splitlines()
    assert lines[0] == "threshold\tfmr\tfnmr\tcmr_k3\tcmr_k15"
    assert lines[1] == "0.000000\t1\t0\t1\t1"
    assert lines[2] == "0.500000\t0.333333333\t0\t0\t0"
    s = ScoreSet("impostor", [0.5, 0.25, 1 / 3])
    write_scores(tmp_path / "s.txt", s)
    assert (tmp_path / "s.txt").read_text() == "0.250000000000\n0.333333333333\n0.500000000000\n"
    assert read_scores(tmp_path / "s.txt").tolist() == [0.25, 0.333333333333, 0.5]


def test_scoreset_range_check():
    with pytest.raises(ValueError):
        ScoreSet("genuine", [1.5])
    with pytest.raises(GridMismatch):
        write_curves("unused", RateCurve(np.array([0.0]), np.zeros(1)), RateCurve(np.array([1.0]), np.zeros(1)), {})
