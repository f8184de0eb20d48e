"""Pairwise-comparison scaling into JOD units, with bootstrap intervals.

Each condition's quality is a Gaussian with a common spread (Thurstone
case V). The probability that condition ``i`` is preferred over ``j`` is
``Phi((q_i - q_j) / s)`` where ``s = 1 / Phi^-1(0.75)``, so a difference of
one JOD means a 75% preference. Scores maximize the binomial likelihood of
the observed win counts and are then shifted so the lowest score is 1.
"""
from dataclasses import dataclass, field
import csv
import itertools
import uuid
from collections import deque

import numpy as np
from scipy import optimize, special, stats

#: spread of the score difference; 1 JOD <-> 75% preference
JOD_SCALE = 1.0 / stats.norm.ppf(0.75)
_P_CLAMP = 1e-12
_Q_BOUND = 10.0


def pref_probability(dq):
    """Probability that a condition ``dq`` JOD better is preferred."""
    return special.ndtr(np.asarray(dq, dtype=np.float64) / JOD_SCALE)


@dataclass(frozen=True, eq=False)
class ComparisonMatrix:
    """Win and trial counts between ``K`` conditions.

    ``wins[i, j]`` is how often ``i`` was preferred over ``j``;
    ``trials = wins + wins.T``.
    """
    labels: tuple
    wins: np.ndarray

    def __post_init__(self):
        wins = np.array(self.wins, copy=True)
        if wins.ndim != 2 or wins.shape[0] != wins.shape[1]:
            raise ValueError("win matrix must be square")
        if wins.shape[0] != len(self.labels):
            raise ValueError(f"{len(self.labels)} labels for a {wins.shape[0]}x{wins.shape[0]} matrix")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("condition labels must be unique")
        if not np.all(np.isfinite(wins)) or np.any(wins < 0) or np.any(wins != np.round(wins)):
            raise ValueError("win counts must be nonnegative integers")
        if np.any(np.diag(wins) != 0):
            raise ValueError("a condition cannot be compared with itself")
        wins = wins.astype(np.int64)
        wins.setflags(write=False)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "wins", wins)

    @property
    def k(self):
        return len(self.labels)

    @property
    def trials(self):
        return self.wins + self.wins.T

    @classmethod
    def from_counts(cls, labels, wins, trials):
        """Build from ``c`` and ``n`` matrices, checking ``c_ij + c_ji = n_ij``."""
        wins = np.asarray(wins)
        trials = np.asarray(trials)
        if not np.array_equal(trials, trials.T):
            raise ValueError("trial counts must be symmetric")
        if not np.array_equal(wins + wins.T, trials):
            raise ValueError("wins[i, j] + wins[j, i] must equal trials[i, j]")
        return cls(tuple(labels), wins)

    @classmethod
    def from_records(cls, records, labels=None):
        """Sum ``(cond_a, cond_b, wins_a, total)`` records into a matrix."""
        records = list(records)
        if labels is None:
            seen = {}
            for a, b, _, _ in records:
                seen.setdefault(a, None)
                seen.setdefault(b, None)
            labels = tuple(seen)
        index = {lab: k for k, lab in enumerate(labels)}
        wins = np.zeros((len(labels), len(labels)), dtype=np.int64)
        for a, b, wa, total in records:
            if a == b:
                raise ValueError(f"condition {a!r} compared with itself")
            if not 0 <= wa <= total:
                raise ValueError(f"wins {wa} outside [0, {total}] for pair ({a}, {b})")
            wins[index[a], index[b]] += wa
            wins[index[b], index[a]] += total - wa
        return cls(tuple(labels), wins)

    def is_connected(self):
        n = self.trials
        seen = {0}
        todo = deque([0])
        while todo:
            i = todo.popleft()
            for j in np.flatnonzero(n[i] > 0):
                if j not in seen:
                    seen.add(int(j))
                    todo.append(int(j))
        return len(seen) == self.k

    def permuted(self, order):
        order = list(order)
        return ComparisonMatrix(tuple(self.labels[i] for i in order),
                                self.wins[np.ix_(order, order)])


def load_comparisons_csv(path):
    """Read ``cond_a,cond_b,wins_a,total`` rows (header optional)."""
    records = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
            a, b, wa, total = (c.strip() for c in row)
            try:
                wa_i, total_i = int(wa), int(total)
            except ValueError:
                if lineno == 1 and not records:
                    continue
                raise ValueError(f"{path}:{lineno}: counts must be integers: {row!r}") from None
            records.append((a, b, wa_i, total_i))
    if not records:
        raise ValueError(f"{path}: no comparison rows")
    return ComparisonMatrix.from_records(records)


def _pairs(m):
    iu, ju = np.triu_indices(m.k, 1)
    n = m.trials[iu, ju]
    keep = n > 0
    return iu[keep], ju[keep], m.wins[iu, ju][keep].astype(float), n[keep].astype(float)


def negative_log_likelihood(q, m):
    """Binomial negative log-likelihood of scores ``q`` given the counts.

    The binomial coefficient does not depend on ``q`` and is left out.
    """
    q = np.asarray(q, dtype=np.float64)
    iu, ju, c, n = _pairs(m)
    dq = q[iu] - q[ju]
    p = np.clip(pref_probability(dq), _P_CLAMP, 1 - _P_CLAMP)
    p_not = np.clip(pref_probability(-dq), _P_CLAMP, 1 - _P_CLAMP)
    return float(-np.sum(c * np.log(p) + (n - c) * np.log(p_not)))


def _nll_and_grad(free, iu, ju, c, n, k):
    q = np.concatenate([[0.0], free])
    z = (q[iu] - q[ju]) / JOD_SCALE
    # both tails from ndtr directly so 1 - p keeps its precision
    p = special.ndtr(z)
    p_not = special.ndtr(-z)
    clamped = (p < _P_CLAMP) | (p_not < _P_CLAMP)
    p = np.clip(p, _P_CLAMP, 1 - _P_CLAMP)
    p_not = np.clip(p_not, _P_CLAMP, 1 - _P_CLAMP)
    f = -np.sum(c * np.log(p) + (n - c) * np.log(p_not))
    dens = stats.norm.pdf(z) / JOD_SCALE
    dfd = -(c / p - (n - c) / p_not) * dens
    dfd[clamped] = 0.0
    g = np.zeros(k)
    np.add.at(g, iu, dfd)
    np.add.at(g, ju, -dfd)
    return f, g[1:]


@dataclass(frozen=True, eq=False)
class QualityScores:
    """Scaled scores of one scaling run.

    ``run_id`` identifies the run; scores from different runs live on
    unrelated scales and must not be combined.
    """
    labels: tuple
    jod: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    anchored: bool = True
    run_id: str = field(default_factory=lambda: uuid.uuid4().hex)

    def as_dict(self):
        return {
            "run_id": self.run_id,
            "anchored": self.anchored,
            "scores": [
                {"label": lab, "jod": float(j), "ci_low": float(lo), "ci_high": float(hi)}
                for lab, j, lo, hi in zip(self.labels, self.jod, self.ci_low, self.ci_high)
            ],
        }

    @classmethod
    def from_dict(cls, d):
        rows = d["scores"]
        return cls(
            labels=tuple(r["label"] for r in rows),
            jod=np.array([r["jod"] for r in rows], dtype=float),
            ci_low=np.array([r.get("ci_low", r["jod"]) for r in rows], dtype=float),
            ci_high=np.array([r.get("ci_high", r["jod"]) for r in rows], dtype=float),
            anchored=bool(d.get("anchored", True)),
            run_id=str(d.get("run_id") or uuid.uuid4().hex),
        )

    def get(self, label):
        return float(self.jod[self.labels.index(label)])


def same_run(*scores):
    """Raise unless all ``scores`` come from one scaling run."""
    ids = {s.run_id for s in scores}
    if len(ids) > 1:
        raise ValueError(
            "scores from different scaling runs are on unrelated scales: "
            + ", ".join(sorted(ids)))


def _hessian(free, iu, ju, c, n, k):
    q = np.concatenate([[0.0], free])
    z = (q[iu] - q[ju]) / JOD_SCALE
    p = np.clip(special.ndtr(z), _P_CLAMP, 1 - _P_CLAMP)
    phi = stats.norm.pdf(z)
    # second derivative of each pair term in z; nonnegative by log-concavity
    h = c * phi * (z * p + phi) / p**2 + (n - c) * phi * (phi - z * (1 - p)) / (1 - p) ** 2
    h = h / JOD_SCALE**2
    hess = np.zeros((k, k))
    np.add.at(hess, (iu, iu), h)
    np.add.at(hess, (ju, ju), h)
    np.add.at(hess, (iu, ju), -h)
    np.add.at(hess, (ju, iu), -h)
    return hess[1:, 1:]


def _projected(free, g):
    g = g.copy()
    g[(free <= -_Q_BOUND) & (g > 0)] = 0.0
    g[(free >= _Q_BOUND) & (g < 0)] = 0.0
    return g


def _newton_polish(free, args, tol, steps=100):
    """Finish with active-set Newton steps and exact line searches.

    L-BFGS-B stops on its function-change test, which near unanimous pairs
    (nearly flat likelihood tails) can leave the gradient well above
    ``tol``. Each step here fixes coordinates on a bound they are pushed
    against, takes the Newton direction on the rest, and moves to the root
    of the directional derivative, clipped at the first bound it meets.
    Working on the gradient alone keeps progress independent of the
    rounding of the likelihood value.
    """
    free = np.clip(np.asarray(free, dtype=float), -_Q_BOUND, _Q_BOUND)
    g = _nll_and_grad(free, *args)[1]
    for _ in range(steps):
        pg = _projected(free, g)
        if np.max(np.abs(pg), initial=0.0) <= tol:
            break
        lower, upper = free <= -_Q_BOUND, free >= _Q_BOUND
        active = (lower & (g > 0)) | (upper & (g < 0))
        hess = _hessian(free, *args)
        damp = 1e-12 * max(1.0, float(np.max(np.diag(hess))))
        while True:
            inner = ~active
            d = np.zeros_like(free)
            try:
                d[inner] = -np.linalg.solve(
                    hess[np.ix_(inner, inner)] + damp * np.eye(inner.sum()), g[inner])
            except np.linalg.LinAlgError:
                d = -pg
                break
            # a coordinate on a bound that the step would push outward stays there
            out = inner & ((lower & (d < 0)) | (upper & (d > 0)))
            if not out.any():
                break
            active |= out
        if g @ d >= 0:
            d = -pg
        # largest step before some coordinate leaves the box
        with np.errstate(divide="ignore", invalid="ignore"):
            room = np.where(d > 0, (_Q_BOUND - free) / d, np.where(d < 0, (-_Q_BOUND - free) / d, np.inf))
        t_max = float(np.min(room))

        def slope(t):
            return float(_nll_and_grad(free + t * d, *args)[1] @ d)

        if not np.isfinite(t_max):
            # unbounded direction: expand until the slope turns non-negative
            t_max = 1.0
            while slope(t_max) < 0 and t_max < 1e6:
                t_max *= 2.0
        if slope(t_max) <= 0:
            t = t_max
        else:
            t = optimize.brentq(slope, 0.0, t_max, xtol=1e-14 * t_max, maxiter=200, disp=False)
        trial = np.clip(free + t * d, -_Q_BOUND, _Q_BOUND)
        if t == t_max:
            hit = np.argmin(room)
            trial[hit] = _Q_BOUND if d[hit] > 0 else -_Q_BOUND
        if np.array_equal(trial, free):
            break
        free = trial
        g = _nll_and_grad(free, *args)[1]
    return free, g


def _solve(m, x0=None, max_iter=1000):
    iu, ju, c, n = _pairs(m)
    k = m.k
    if k == 1:
        return np.zeros(1)
    x0 = np.zeros(k - 1) if x0 is None else np.asarray(x0[1:] - x0[0], dtype=float)
    args = (iu, ju, c, n, k)
    res = optimize.minimize(
        _nll_and_grad, np.clip(x0, -_Q_BOUND, _Q_BOUND), args=args, jac=True,
        method="L-BFGS-B", bounds=[(-_Q_BOUND, _Q_BOUND)] * (k - 1),
        options={"maxiter": max_iter, "gtol": 1e-10, "ftol": 1e-15},
    )
    scale = max(1.0, float(np.max(n)) if len(n) else 1.0)
    free, g = _newton_polish(res.x, args, 1e-8 * scale)
    # projected gradient: components pushing against an active bound vanish
    g = _projected(free, g)
    if np.max(np.abs(g), initial=0.0) > 1e-8 * scale:
        raise RuntimeError(
            f"scaling did not converge: projected gradient {np.max(np.abs(g)):.3g} "
            f"after {res.nit} iterations ({res.message})")
    return np.concatenate([[0.0], free])


def _check(m):
    if m.k < 1:
        raise ValueError("no conditions to scale")
    if not m.is_connected():
        raise ValueError(
            "comparison graph is disconnected; scores of separate components "
            "cannot be placed on one scale")


def anchor(q):
    """Shift scores so the minimum is exactly 1."""
    q = np.asarray(q, dtype=np.float64)
    return q - q.min() + 1.0


def scale(m, run_id=None):
    """Maximum-likelihood JOD scores, anchored so the minimum is 1.

    Raises
    ------
    ValueError
        If the comparison graph is disconnected.
    RuntimeError
        If the optimizer does not reach a stationary point.
    """
    _check(m)
    q = anchor(_solve(m))
    kw = {"run_id": run_id} if run_id else {}
    return QualityScores(m.labels, q, q.copy(), q.copy(), anchored=True, **kw)


def bootstrap_ci(m, n_boot=500, level=0.95, seed=0, run_id=None):
    """Scores with parametric bootstrap confidence intervals.

    Every replicate redraws each pair's win count from
    ``Binomial(n_ij, c_ij / n_ij)``, rescales and anchors. Replicate ``b``
    uses a generator seeded with ``(seed, b)``, so results do not depend on
    evaluation order.
    """
    _check(m)
    if n_boot < 1:
        raise ValueError("need at least one bootstrap replicate")
    if not 0 < level < 1:
        raise ValueError("confidence level must lie in (0, 1)")
    q_hat = _solve(m)
    iu, ju, c, n = _pairs(m)
    p = c / n
    reps = np.empty((n_boot, m.k))
    for b in range(n_boot):
        rng = np.random.default_rng([seed, b])
        draw = rng.binomial(n.astype(np.int64), p)
        wins = np.zeros((m.k, m.k), dtype=np.int64)
        wins[iu, ju] = draw
        wins[ju, iu] = n.astype(np.int64) - draw
        reps[b] = anchor(_solve(ComparisonMatrix(m.labels, wins), x0=q_hat))
    alpha = (1.0 - level) / 2.0
    lo, hi = np.percentile(reps, [100 * alpha, 100 * (1 - alpha)], axis=0)
    jod = anchor(q_hat)
    # percentile intervals can miss a point estimate sitting on a clamp
    lo = np.minimum(lo, jod)
    hi = np.maximum(hi, jod)
    kw = {"run_id": run_id} if run_id else {}
    return QualityScores(m.labels, jod, lo, hi, anchored=True, **kw)


def pearson(x, y):
    """Pearson correlation and its two-sided p-value.

    The p-value comes from the t statistic ``r * sqrt((n-2) / (1-r^2))``
    with ``n - 2`` degrees of freedom, evaluated through the regularized
    incomplete beta function.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"inputs must be 1-D and of equal length, got {x.shape} and {y.shape}")
    n = len(x)
    if n < 3:
        raise ValueError("need at least three points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("correlation is undefined for a constant input")
    r = float(dx @ dy) / np.sqrt(sxx * syy)
    r = float(min(1.0, max(-1.0, r)))
    df = n - 2
    if abs(r) == 1.0:
        return r, 0.0
    t2 = r * r * df / (1.0 - r * r)
    # P(|T| > t) = I_{df/(df+t^2)}(df/2, 1/2)
    p = float(special.betainc(df / 2.0, 0.5, df / (df + t2)))
    return r, p


def correlate(scores, metrics, metric_names=None):
    """Correlate one run's JODs with per-condition objective metrics.

    Parameters
    ----------
    scores : QualityScores or sequence of QualityScores
        Several entries must share a ``run_id``.
    metrics : dict
        ``{label: {metric_name: value}}``.

    Returns
    -------
    dict
        ``{metric_name: {"r": r, "p": p, "n": n}}`` over the labels present
        in both inputs.
    """
    if isinstance(scores, QualityScores):
        scores = [scores]
    same_run(*scores)
    jods = {}
    for s in scores:
        for lab, j in zip(s.labels, s.jod):
            jods[lab] = float(j)
    labels = [lab for lab in jods if lab in metrics]
    if len(labels) < 3:
        raise ValueError(f"need at least three conditions with both scores and metrics, got {len(labels)}")
    if metric_names is None:
        metric_names = sorted(set(itertools.chain.from_iterable(metrics[lab] for lab in labels)))
    out = {}
    for name in metric_names:
        have = [lab for lab in labels if name in metrics[lab]]
        r, p = pearson([jods[lab] for lab in have], [metrics[lab][name] for lab in have])
        out[name] = {"r": r, "p": p, "n": len(have)}
    return out
