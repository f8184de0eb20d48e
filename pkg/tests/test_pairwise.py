import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from svcorrect.pairwise import (
    JOD_SCALE, ComparisonMatrix, QualityScores, anchor, bootstrap_ci, correlate,
    load_comparisons_csv, negative_log_likelihood, pearson, pref_probability,
    same_run, scale,
)
from oracles import grid_nll_minimum, t_two_sided_p


def two(c, n=1000):
    return ComparisonMatrix(("A", "B"), np.array([[0, c], [n - c, 0]]))


def chain(p=0.75, n=1000):
    w = int(p * n)
    return ComparisonMatrix.from_records([("B", "A", w, n), ("C", "B", w, n)], labels=("A", "B", "C"))


# ---------------------------------------------------------------- probability

def test_pref_probability_calibration():
    assert pref_probability(0.0) == 0.5
    assert pref_probability(1.0) == pytest.approx(0.75, abs=1e-9)
    assert pref_probability(-1.0) == pytest.approx(0.25, abs=1e-9)
    assert JOD_SCALE == pytest.approx(1.4826, abs=1e-4)


@given(st.floats(-50, 50))
def test_pref_probability_antisymmetric(dq):
    assert pref_probability(dq) + pref_probability(-dq) == pytest.approx(1.0, abs=1e-15)


# ---------------------------------------------------------------- matrix

def test_matrix_validation():
    with pytest.raises(ValueError, match="square"):
        ComparisonMatrix(("A",), np.zeros((1, 2)))
    with pytest.raises(ValueError, match="itself"):
        ComparisonMatrix(("A", "B"), np.array([[1, 0], [0, 0]]))
    with pytest.raises(ValueError, match="nonnegative"):
        ComparisonMatrix(("A", "B"), np.array([[0, -1], [0, 0]]))
    with pytest.raises(ValueError, match="unique"):
        ComparisonMatrix(("A", "A"), np.zeros((2, 2)))
    with pytest.raises(ValueError, match="must equal"):
        ComparisonMatrix.from_counts("AB", [[0, 3], [3, 0]], [[0, 5], [5, 0]])


def test_from_records_sums_duplicates():
    m = ComparisonMatrix.from_records([("A", "B", 3, 5), ("B", "A", 4, 10)])
    assert m.wins.tolist() == [[0, 9], [6, 0]]
    assert m.trials.tolist() == [[0, 15], [15, 0]]


def test_csv_loader(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("cond_a,cond_b,wins_a,total\nA,B,7,10\nB,C,2,4\n")
    m = load_comparisons_csv(p)
    assert m.labels == ("A", "B", "C")
    assert m.wins[0, 1] == 7 and m.wins[2, 1] == 2
    p.write_text("A,B,7,10\nA,B,x,3\n")
    with pytest.raises(ValueError, match=":2:"):
        load_comparisons_csv(p)


# ---------------------------------------------------------------- likelihood

def test_nll_equal_scores():
    m = chain()
    assert negative_log_likelihood(np.zeros(3), m) == pytest.approx(2000 * np.log(2))


def test_nll_grid_minimum_two_conditions():
    m = two(750)
    dq = grid_nll_minimum(lambda d: negative_log_likelihood([d, 0.0], m))
    assert dq == pytest.approx(1.0, abs=2e-3)


def test_nll_ignores_empty_pairs():
    m = two(750)
    m3 = ComparisonMatrix(("A", "B", "C"), np.array([[0, 750, 0], [250, 0, 0], [0, 0, 0]]))
    assert negative_log_likelihood([1.3, 0.2, 7.0], m3) == negative_log_likelihood([1.3, 0.2], m)


@settings(max_examples=50)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.floats(-20, 20))
def test_nll_translation_gauge(q, shift):
    m = chain(0.6)
    q = np.array(q)
    a = negative_log_likelihood(q, m)
    assert negative_log_likelihood(q + shift, m) == pytest.approx(a, rel=1e-9)
    assert negative_log_likelihood(anchor(q), m) == pytest.approx(a, rel=1e-9)


# ---------------------------------------------------------------- scaling

def test_scale_two_conditions():
    s = scale(two(750))
    assert s.get("A") == pytest.approx(2.0, abs=0.05)
    assert s.get("B") == 1.0
    dq = grid_nll_minimum(lambda d: negative_log_likelihood([d, 0.0], two(750)))
    assert s.get("A") - s.get("B") == pytest.approx(dq, abs=2e-3)


def test_scale_symmetric_all_one():
    m = ComparisonMatrix.from_records([("A", "B", 50, 100), ("B", "C", 50, 100), ("A", "C", 50, 100)])
    np.testing.assert_allclose(scale(m).jod, 1.0, atol=1e-6)


def test_scale_chain():
    s = scale(chain())
    np.testing.assert_allclose(s.jod, [1.0, 2.0, 3.0], atol=0.1)


def test_scale_chain_matches_2d_grid():
    m = chain(0.7, 200)
    s = scale(m)
    grid = np.arange(-1.0, 4.0, 0.01)
    best = min(((negative_log_likelihood([0.0, b, c], m), b, c) for b in grid for c in grid))
    assert s.jod[1] - s.jod[0] == pytest.approx(best[1], abs=0.011)
    assert s.jod[2] - s.jod[0] == pytest.approx(best[2], abs=0.011)


def test_scale_disconnected():
    m = ComparisonMatrix.from_records([("A", "B", 5, 10), ("C", "D", 5, 10)])
    assert not m.is_connected()
    with pytest.raises(ValueError, match="disconnected"):
        scale(m)


def test_scale_degenerate_pair_bounded():
    s = scale(two(1000))
    assert np.all(np.isfinite(s.jod))
    assert s.jod.max() - s.jod.min() <= 20.0


def _kkt_residual(q, m):
    # finite-difference gradient in the gauge q_0 = 0, with the box on q - q_0
    free = q[1:] - q[0]
    res = []
    for i in range(len(free)):
        h = 1e-6
        up, dn = free.copy(), free.copy()
        up[i] += h
        dn[i] -= h
        g = (negative_log_likelihood(np.r_[0.0, up], m) - negative_log_likelihood(np.r_[0.0, dn], m)) / (2 * h)
        if (free[i] <= -10 + 1e-9 and g > 0) or (free[i] >= 10 - 1e-9 and g < 0):
            g = 0.0
        res.append(abs(g))
    return max(res)


def test_scale_unanimous_pairs_against_bound():
    # two unanimous pairs pull condition D both ways while F sits on the bound
    labels = tuple("ABCDEF")
    m = ComparisonMatrix.from_records(
        [("A", "B", 2, 25), ("B", "C", 11, 35), ("C", "D", 4, 4), ("D", "E", 37, 37), ("E", "F", 20, 35)],
        labels=labels)
    s = scale(m)
    q = s.jod - s.jod[0]
    assert q.min() == pytest.approx(-10.0)
    assert _kkt_residual(q, m) < 1e-5


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(0, 10_000))
def test_bootstrap_sparse_unanimous(k, seed):
    rng = np.random.default_rng(seed)
    labels = tuple("ABCDEF"[:k])
    recs = []
    for i in range(k - 1):
        n = int(rng.integers(1, 40))
        recs.append((labels[i], labels[i + 1], int(rng.choice([0, n, rng.integers(0, n + 1)])), n))
    b = bootstrap_ci(ComparisonMatrix.from_records(recs, labels=labels), 20, seed=seed)
    assert np.all(b.ci_low <= b.jod) and np.all(b.jod <= b.ci_high)


def test_monotone_recovery():
    ps = np.linspace(0.05, 0.95, 19)
    dq = [np.diff(scale(two(int(round(p * 1000)))).jod[::-1])[0] for p in ps]
    assert np.all(np.diff(dq) > 0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.permutations(range(4)))
def test_relabeling_equivariance(seed, order):
    rng = np.random.default_rng(seed)
    n = rng.integers(5, 60, size=(4, 4))
    n = np.triu(n, 1)
    n = n + n.T
    w = np.triu(rng.binomial(n, 0.5), 1)
    w = w + np.tril(n - w.T, -1)
    m = ComparisonMatrix(tuple("ABCD"), w)
    s = scale(m)
    sp = scale(m.permuted(order))
    for lab in "ABCD":
        assert sp.get(lab) == pytest.approx(s.get(lab), abs=1e-5)


# ---------------------------------------------------------------- bootstrap

def test_bootstrap_deterministic():
    m = chain(0.7, 40)
    a = bootstrap_ci(m, 100, seed=3)
    b = bootstrap_ci(m, 100, seed=3)
    assert np.array_equal(a.ci_low, b.ci_low) and np.array_equal(a.ci_high, b.ci_high)
    c = bootstrap_ci(m, 100, seed=4)
    assert not np.array_equal(a.ci_high, c.ci_high)


def test_bootstrap_contains_estimate():
    s = bootstrap_ci(chain(0.8, 30), 200, seed=0)
    assert np.all(s.ci_low <= s.jod) and np.all(s.jod <= s.ci_high)


def test_bootstrap_symmetric_overlap():
    m = ComparisonMatrix.from_records([("A", "B", 20, 40), ("B", "C", 20, 40), ("A", "C", 20, 40)])
    s = bootstrap_ci(m, 200, seed=1)
    assert s.ci_low.max() <= s.ci_high.min()


def test_bootstrap_large_n_narrow():
    s = bootstrap_ci(chain(0.75, 10**6), 50, seed=0)
    assert np.all(s.ci_high - s.ci_low <= 0.05)


def test_bootstrap_argument_checks():
    with pytest.raises(ValueError):
        bootstrap_ci(two(500), 0)
    with pytest.raises(ValueError):
        bootstrap_ci(two(500), 10, level=1.0)


# ---------------------------------------------------------------- runs

def test_scores_round_trip_and_runs():
    s = scale(chain(), run_id="one")
    back = QualityScores.from_dict(s.as_dict())
    assert back.run_id == "one" and back.labels == s.labels
    np.testing.assert_array_equal(back.jod, s.jod)
    same_run(s, back)
    with pytest.raises(ValueError, match="different scaling runs"):
        same_run(s, scale(chain(), run_id="two"))


def test_correlate_refuses_mixed_runs():
    a = scale(chain(), run_id="r1")
    b = QualityScores(("D",), np.array([1.0]), np.array([1.0]), np.array([1.0]), run_id="r2")
    metrics = {k: {"rpa": v} for k, v in zip("ABCD", [0.1, 0.5, 0.9, 0.3])}
    with pytest.raises(ValueError, match="different scaling runs"):
        correlate([a, b], metrics)
    out = correlate(a, metrics)
    assert out["rpa"]["n"] == 3 and out["rpa"]["r"] > 0.99


# ---------------------------------------------------------------- Pearson

def test_pearson_linear():
    x = np.arange(10.0)
    r, p = pearson(x, 2 * x + 3)
    assert abs(r - 1) <= 1e-12 and p == 0.0
    assert pearson(x, -x)[0] == pytest.approx(-1.0, abs=1e-12)


def test_pearson_five_points():
    r, p = pearson([1, 2, 3, 4, 5], [2, 1, 4, 3, 5])
    assert r == pytest.approx(0.8, abs=1e-15)
    assert p == pytest.approx(t_two_sided_p(0.8, 5), abs=1e-6)
    assert p == pytest.approx(0.104, abs=1e-3)


@settings(max_examples=50, deadline=None)
@given(st.integers(3, 40), st.integers(0, 10_000))
def test_pearson_against_scipy_and_quadrature(n, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=n), rng.normal(size=n)
    r, p = pearson(x, y)
    ref = stats.pearsonr(x, y)
    assert r == pytest.approx(ref[0], abs=1e-12)
    assert p == pytest.approx(t_two_sided_p(r, n), abs=1e-6)


def test_pearson_errors():
    with pytest.raises(ValueError, match="constant"):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError, match="equal length"):
        pearson([1, 2, 3], [1, 2])
    with pytest.raises(ValueError, match="three"):
        pearson([1, 2], [1, 2])
