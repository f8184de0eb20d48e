"""Exit criteria of the build, one test per criterion.

Each test records a PASS/FAIL line (shown in the terminal summary) and then
asserts the same condition, including its runtime limit.
"""
import math
import time

import numpy as np
import pytest

from svcorrect.align import CtwConfig, ctw, dtw
from svcorrect.contour import PitchContour
from svcorrect.correct import correct_singing, stretch
from svcorrect.align import WarpPath
from svcorrect.melody import ContourPair, evaluate, evaluate_pitch
from svcorrect.pairwise import ComparisonMatrix, bootstrap_ci, negative_log_likelihood, pearson, scale
from svcorrect.vocoder import AnalysisConfig, analyze, estimate_f0, synthesize
from oracles import brute_force_dtw, grid_nll_minimum, recount_melody, t_two_sided_p
from signals import frame_contour, vibrato, vowel

pytestmark = pytest.mark.acceptance
CFG = AnalysisConfig()


def test_1_dtw_oracle(criterion):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(100):
        d = int(rng.integers(1, 5))
        x = rng.normal(size=(int(rng.integers(1, 8)), d))
        y = rng.normal(size=(int(rng.integers(1, 8)), d))
        best, winners = brute_force_dtw(x, y)
        path, cost = dtw(x, y)
        if cost != best or len(winners) != 1 or list(path) != winners[0]:
            mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 10
    criterion(1, "DTW equals exhaustive enumeration", ok,
              f"{mismatches}/100 mismatches, {elapsed:.2f} s < 10 s")
    assert ok


def test_2_ctw_monotone(criterion):
    rng = np.random.default_rng(7)
    cfg = CtwConfig()
    t0 = time.perf_counter()
    violations = over = 0
    for _ in range(50):
        n, m = rng.integers(2, 61, size=2)
        dx, dy = rng.integers(1, 9, size=2)
        res = ctw(rng.normal(size=(n, dx)), rng.normal(size=(m, dy)), cfg)
        h = res.objective_history
        violations += sum(b > a + 1e-9 * abs(a) for a, b in zip(h, h[1:]))
        over += res.n_iter > cfg.max_iters
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and over == 0 and elapsed < 30
    criterion(2, "CTW objective non-increasing per half-step", ok,
              f"{violations} increases, {over} over max_iters, {elapsed:.2f} s < 30 s")
    assert ok


def test_3_melody_oracle(criterion):
    rng = np.random.default_rng(11)
    t0 = time.perf_counter()
    mismatches = order = 0
    for _ in range(1000):
        n = int(rng.integers(2, 120))
        ref = np.where(rng.random(n) < 0.6, rng.uniform(60, 1000, n), 0.0)
        ref[0], ref[-1] = 200.0, 0.0
        # estimates near the reference, octave errors, and random voicing
        est = ref * 2 ** (rng.choice([0, 0, 1, -1], n) + rng.normal(0, 60, n) / 1200)
        est = np.where(rng.random(n) < 0.15, 0.0, est)
        est = np.where((ref == 0) & (rng.random(n) < 0.3), rng.uniform(60, 1000, n), est)
        rep = evaluate(ContourPair(PitchContour(ref, 0.01), PitchContour(est, 0.01))).as_dict()
        mismatches += rep != recount_melody(ref, est, 50.0)
        order += rep["rpa"] > rep["rca"]
    ref = np.array([110.0, 220.0, 0.0, 440.0])
    est = ref * 2 ** (50.0 / 1200)
    boundary = evaluate(ContourPair(PitchContour(ref, 0.01), PitchContour(est, 0.01))).rpa
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and order == 0 and boundary == 1.0 and elapsed < 5
    criterion(3, "melody metrics equal brute-force recount", ok,
              f"{mismatches}/1000 mismatches, RPA>RCA {order} times, "
              f"+50 cent RPA {boundary}, {elapsed:.2f} s < 5 s")
    assert ok


def test_4_hand_counted(criterion):
    rep = evaluate(ContourPair(PitchContour([220, 220, 220, 0], 0.01),
                               PitchContour([220, 233, 440, 220], 0.01)))
    got = (rep.rpa, rep.rca, rep.vr, rep.vfa, rep.oa)
    ok = got == (1 / 3, 2 / 3, 1.0, 1.0, 1 / 4)
    criterion(4, "4-frame hand-counted case", ok,
              "RPA {:.4f} RCA {:.4f} VR {} VFA {} OA {}".format(*got))
    assert ok


def test_5_vocoder_round_trip(criterion):
    t0 = time.perf_counter()
    clip, f_inst = vowel(vibrato(220, 20, 5), 2.0)
    feat = analyze(clip, CFG)
    out = analyze(synthesize(feat, CFG), CFG)
    truth = PitchContour(frame_contour(f_inst, CFG.hop_samples, len(feat)), CFG.hop)
    rpa, _ = evaluate_pitch(ContourPair(truth, out.f0))
    elapsed = time.perf_counter() - t0
    ok = rpa >= 0.95 and elapsed < 10
    criterion(5, "vibrato analyze-synthesize-analyze", ok, f"RPA {rpa:.4f} >= 0.95, {elapsed:.2f} s < 10 s")
    assert ok


def test_6_end_to_end(criterion):
    t0 = time.perf_counter()
    src, _ = vowel(lambda t: 200.0, 1.0)
    tgt, f_inst = vowel(vibrato(250, 20, 5), 1.5)
    res = correct_singing(src, tgt)
    out_f0 = estimate_f0(res.output, CFG)
    truth = PitchContour(frame_contour(f_inst, CFG.hop_samples, len(out_f0)), CFG.hop)
    rpa, _ = evaluate_pitch(ContourPair(truth, out_f0))
    rpa_t, _ = evaluate_pitch(ContourPair(res.target_features.f0, out_f0))
    elapsed = time.perf_counter() - t0
    dur = res.output.duration
    ok = abs(dur - 1.5) <= CFG.hop and min(rpa, rpa_t) >= 0.9 and elapsed < 30
    criterion(6, "end-to-end correction 1.0 s/200 Hz -> 1.5 s/250 Hz", ok,
              f"duration {dur:.4f} s, RPA vs contour {rpa:.4f}, vs analyzed target {rpa_t:.4f}, "
              f"{elapsed:.2f} s < 30 s")
    assert ok


def test_7_scaler_calibration(criterion):
    t0 = time.perf_counter()
    two = ComparisonMatrix(("A", "B"), np.array([[0, 750], [250, 0]]))
    s2 = scale(two)
    oracle = 1.0 + grid_nll_minimum(lambda d: negative_log_likelihood([d, 0.0], two))
    sym = ComparisonMatrix.from_records([("A", "B", 500, 1000), ("B", "C", 500, 1000), ("A", "C", 500, 1000)])
    s_sym = scale(sym)
    chain = ComparisonMatrix.from_records([("B", "A", 750, 1000), ("C", "B", 750, 1000)], labels=("A", "B", "C"))
    s3 = scale(chain)
    elapsed = time.perf_counter() - t0
    ok = (abs(s2.jod[0] - 2) <= 0.05 and s2.jod[1] == 1 and abs(s2.jod[0] - oracle) <= 0.002
          and np.all(np.abs(s_sym.jod - 1) <= 1e-6)
          and np.all(np.abs(s3.jod - [1, 2, 3]) <= 0.1) and elapsed < 10)
    criterion(7, "JOD scaler calibration", ok,
              f"750/1000 -> {np.round(s2.jod, 4).tolist()} (grid {oracle:.3f}), "
              f"symmetric max dev {np.max(np.abs(s_sym.jod - 1)):.1e}, "
              f"chain -> {np.round(s3.jod, 4).tolist()}, {elapsed:.2f} s < 10 s")
    assert ok


def test_8_bootstrap(criterion):
    t0 = time.perf_counter()
    small = ComparisonMatrix.from_records([("A", "B", 14, 20), ("B", "C", 9, 20), ("A", "C", 15, 20)])
    a = bootstrap_ci(small, 500, seed=5)
    b = bootstrap_ci(small, 500, seed=5)
    same = np.array_equal(a.ci_low, b.ci_low) and np.array_equal(a.ci_high, b.ci_high)
    n = 10**6
    big = ComparisonMatrix.from_records([("A", "B", 600_000, n), ("B", "C", 550_000, n), ("A", "C", 700_000, n)])
    c = bootstrap_ci(big, 500, seed=0)
    width = float(np.max(c.ci_high - c.ci_low))
    elapsed = time.perf_counter() - t0
    ok = same and width <= 0.05 and elapsed < 60
    criterion(8, "bootstrap determinism and shrinkage (B=500)", ok,
              f"identical CIs {same}, max width at n=1e6 {width:.4f} <= 0.05, {elapsed:.2f} s < 60 s")
    assert ok


def test_9_pearson(criterion):
    x = np.arange(10.0)
    r_lin, _ = pearson(x, 2 * x + 3)
    r, p = pearson([1, 2, 3, 4, 5], [2, 1, 4, 3, 5])
    p_oracle = t_two_sided_p(0.8, 5)
    ok = abs(r_lin - 1) <= 1e-12 and r == pytest.approx(0.8, abs=1e-15) and abs(p - p_oracle) <= 1e-3
    criterion(9, "Pearson r and p", ok,
              f"linear r-1 {r_lin - 1:.1e}, r {r!r}, p {p:.6f} vs integration {p_oracle:.6f}")
    assert ok


def test_10_stretch(criterion):
    avg = stretch(np.array([1.0, 3, 5, 7]), WarpPath([(0, 0), (1, 0), (2, 1), (3, 1)]), 2)
    const = stretch(np.array([[1.5], [-2.0]]), WarpPath([(0, 0), (0, 1), (1, 2), (1, 3)]), 4)
    rng = np.random.default_rng(10)
    bad = 0
    for _ in range(200):
        n, m = (int(v) for v in rng.integers(1, 40, size=2))
        i = j = 0
        pairs = [(0, 0)]
        while (i, j) != (n - 1, m - 1):
            moves = [s for s in ((1, 1), (1, 0), (0, 1)) if i + s[0] < n and j + s[1] < m]
            di, dj = moves[rng.integers(len(moves))]
            i, j = i + di, j + dj
            pairs.append((i, j))
        out = stretch(rng.normal(size=(n, 3)), WarpPath(pairs, n, m), m)
        bad += out.shape != (m, 3)
    ok = avg.tolist() == [2.0, 6.0] and const[:, 0].tolist() == [1.5, 1.5, -2.0, -2.0] and bad == 0
    criterion(10, "feature stretch examples and length", ok,
              f"average {avg.tolist()}, constant {const[:, 0].tolist()}, {bad}/200 wrong lengths")
    assert ok
