"""Temporal alignment: dynamic time warping and canonical time warping.

Canonical time warping alternates two steps on a pair of feature sequences:
fit a canonical correlation analysis (CCA) on the frame pairs matched by the
current warp path, then re-run DTW on the sequences projected into the
shared subspace. Both steps lower the same least-squares objective

    J = sum over (i, j) in path of || Vx'(x_i - mx) - Vy'(y_j - my) ||^2

which is recorded after every half-step.
"""
from dataclasses import dataclass, field
import logging

import numpy as np

from . import kernels

logger = logging.getLogger(__name__)

_STEPS = {(1, 0), (0, 1), (1, 1)}


class WarpPath:
    """Monotone sequence of ``(i, j)`` index pairs aligning two sequences.

    Parameters
    ----------
    pairs : array_like, shape (L, 2)
        Index pairs, starting at ``(0, 0)``.
    n, m : int, optional
        Lengths of the aligned sequences. Default to ``last pair + 1``.

    Raises
    ------
    ValueError
        If the pairs violate the boundary, step or coverage rules.
    """

    __slots__ = ("pairs", "n", "m")

    def __init__(self, pairs, n=None, m=None):
        pairs = np.asarray(pairs, dtype=np.intp)
        if pairs.ndim != 2 or pairs.shape[1] != 2 or len(pairs) == 0:
            raise ValueError("warp path must be a non-empty (L, 2) array of index pairs")
        n = int(pairs[-1, 0]) + 1 if n is None else int(n)
        m = int(pairs[-1, 1]) + 1 if m is None else int(m)
        if tuple(pairs[0]) != (0, 0):
            raise ValueError(f"warp path must start at (0, 0), got {tuple(pairs[0])}")
        if tuple(pairs[-1]) != (n - 1, m - 1):
            raise ValueError(
                f"warp path must end at ({n - 1}, {m - 1}), got {tuple(pairs[-1])}")
        steps = np.diff(pairs, axis=0)
        bad = ~(((steps == 0) | (steps == 1)).all(axis=1) & (steps.sum(axis=1) > 0))
        if bad.any():
            k = int(np.flatnonzero(bad)[0])
            raise ValueError(
                f"illegal step {tuple(steps[k])} at position {k}; "
                f"allowed steps are {sorted(_STEPS)}")
        # with unit steps from (0,0) to (n-1,m-1) every index is visited
        pairs.setflags(write=False)
        self.pairs = pairs
        self.n = n
        self.m = m

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return (tuple(p) for p in self.pairs.tolist())

    def __eq__(self, other):
        if not isinstance(other, WarpPath):
            return NotImplemented
        return self.pairs.shape == other.pairs.shape and bool(np.all(self.pairs == other.pairs))

    def __repr__(self):
        return f"WarpPath(n={self.n}, m={self.m}, length={len(self)})"

    @property
    def i(self):
        return self.pairs[:, 0]

    @property
    def j(self):
        return self.pairs[:, 1]

    @classmethod
    def diagonal(cls, n, m):
        """Path hugging the straight line from ``(0, 0)`` to ``(n-1, m-1)``."""
        if n < 1 or m < 1:
            raise ValueError("sequence lengths must be positive")
        if n == 1 or m == 1:
            k = np.arange(max(n, m))
            return cls(np.column_stack([k * (n > 1), k * (m > 1)]), n, m)
        ti = np.arange(n)[:, None] / (n - 1)
        tj = np.arange(m)[None, :] / (m - 1)
        cost = np.ascontiguousarray(np.abs(ti - tj))
        return cls(kernels.backtrack(kernels.accumulate(cost)), n, m)


def _check_pair(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim == 1:
        y = y[:, None]
    if x.ndim != 2 or y.ndim != 2:
        raise ValueError("feature sequences must be 1-D or 2-D arrays")
    if len(x) == 0 or len(y) == 0:
        raise ValueError("feature sequences must contain at least one frame")
    return x, y


def frame_distances(x, y, metric="euclidean"):
    """Pairwise frame distances between ``x`` (N, d) and ``y`` (M, d).

    Squared differences are summed feature by feature in index order, so the
    result is reproducible by a plain scalar loop.
    """
    x, y = _check_pair(x, y)
    if x.shape[1] != y.shape[1]:
        raise ValueError(
            f"feature dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    acc = np.zeros((len(x), len(y)))
    for k in range(x.shape[1]):
        diff = x[:, k][:, None] - y[:, k][None, :]
        acc += diff * diff
    if metric == "euclidean":
        return np.sqrt(acc)
    if metric == "sqeuclidean":
        return acc
    raise ValueError(f"unknown metric {metric!r}")


def dtw(x, y, metric="euclidean"):
    """Dynamic time warping between two feature sequences.

    Parameters
    ----------
    x : np.ndarray, shape (N, d) or (N,)
    y : np.ndarray, shape (M, d) or (M,)
    metric : {'euclidean', 'sqeuclidean'}
        Local frame distance. Canonical time warping uses the squared form so
        that the DTW step minimizes its least-squares objective.

    Returns
    -------
    path : WarpPath
    cost : float
        Sum of local distances along ``path``; minimal over all paths with
        steps (1,0), (0,1), (1,1).
    """
    cost = frame_distances(x, y, metric)
    acc = kernels.accumulate(cost)
    path = WarpPath(kernels.backtrack(acc), *cost.shape)
    return path, float(acc[-1, -1])


@dataclass
class CcaProjection:
    """Paired projections from CCA.

    ``vx`` (dx, d) and ``vy`` (dy, d) are whitened by the regularized
    covariances, so ``vx.T @ (Cxx + rx I) @ vx`` is the identity.
    """
    vx: np.ndarray
    vy: np.ndarray
    correlations: np.ndarray
    mean_x: np.ndarray
    mean_y: np.ndarray

    def project_x(self, x):
        return (np.asarray(x, dtype=np.float64) - self.mean_x) @ self.vx

    def project_y(self, y):
        return (np.asarray(y, dtype=np.float64) - self.mean_y) @ self.vy


def _inv_sqrt(c):
    w, v = np.linalg.eigh(c)
    floor = max(w.max(), 0.0) * 1e-12
    if floor == 0.0:
        raise ValueError("covariance is zero; the features are constant")
    w = np.maximum(w, floor)
    return (v / np.sqrt(w)) @ v.T


def cca(xa, ya, dim, ridge=0.0):
    """Regularized canonical correlation analysis on time-aligned rows.

    Parameters
    ----------
    xa : np.ndarray, shape (L, dx)
    ya : np.ndarray, shape (L, dy)
    dim : int
        Number of canonical pairs to keep.
    ridge : float or (float, float)
        Added to the diagonal of each covariance (one value, or one per view).

    Returns
    -------
    CcaProjection
        Top ``dim`` directions with correlations sorted in descending order.
    """
    xa, ya = _check_pair(xa, ya)
    if len(xa) != len(ya):
        raise ValueError(f"row counts differ: {len(xa)} vs {len(ya)}")
    n_rows = len(xa)
    if n_rows < 2:
        raise ValueError("CCA needs at least two aligned rows")
    dx, dy = xa.shape[1], ya.shape[1]
    bound = min(dx, dy, n_rows - 1)
    if not 1 <= dim <= bound:
        raise ValueError(f"subspace dimension {dim} outside [1, {bound}]")
    rx, ry = (ridge, ridge) if np.isscalar(ridge) else ridge
    if rx < 0 or ry < 0:
        raise ValueError("ridge must be nonnegative")

    mx = xa.mean(axis=0)
    my = ya.mean(axis=0)
    xc = xa - mx
    yc = ya - my
    cxx = xc.T @ xc / n_rows + rx * np.eye(dx)
    cyy = yc.T @ yc / n_rows + ry * np.eye(dy)
    cxy = xc.T @ yc / n_rows
    wx = _inv_sqrt(cxx)
    wy = _inv_sqrt(cyy)
    u, s, vt = np.linalg.svd(wx @ cxy @ wy)
    return CcaProjection(
        vx=wx @ u[:, :dim],
        vy=wy @ vt.T[:, :dim],
        correlations=np.clip(s[:dim], 0.0, 1.0),
        mean_x=mx,
        mean_y=my,
    )


@dataclass
class CtwConfig:
    """Canonical time warping settings.

    ``ridge`` is relative: each view's covariance gets ``ridge`` times its
    average diagonal added. ``subspace_dim=None`` means ``min(10, dx, dy)``.
    """
    subspace_dim: int | None = None
    ridge: float = 1e-4
    max_iters: int = 20
    tol: float = 1e-4

    def __post_init__(self):
        if self.subspace_dim is not None and self.subspace_dim < 1:
            raise ValueError("subspace_dim must be positive")
        if self.ridge < 0:
            raise ValueError("ridge must be nonnegative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.tol < 0:
            raise ValueError("tol must be nonnegative")


@dataclass
class CtwResult:
    """Outcome of :func:`ctw`.

    ``objective_history`` holds the objective after each half-step, CCA and
    DTW alternating, starting with a CCA step. ``stop_reason`` is one of
    ``'path_repeated'``, ``'tolerance'``, ``'max_iters'`` or ``'no_descent'``.
    """
    path: WarpPath
    objective_history: list
    n_iter: int
    stop_reason: str
    projection: CcaProjection | None = field(default=None, repr=False)


def _objective(x, y, path, proj):
    # means re-estimated on the path: the optimal offset for fixed projections
    a = x[path.i] @ proj.vx
    b = y[path.j] @ proj.vy
    r = (a - a.mean(axis=0)) - (b - b.mean(axis=0))
    return float(np.sum(r * r))


def _fit_cca(x, y, path, dim, ridge):
    xa = x[path.i]
    ya = y[path.j]
    rx = ridge * np.mean(np.var(xa, axis=0))
    ry = ridge * np.mean(np.var(ya, axis=0))
    return cca(xa, ya, dim, (rx, ry))


def ctw(x, y, cfg=None):
    """Canonical time warping of ``x`` (N, dx) onto ``y`` (M, dy).

    The initial path is DTW on the raw features when ``dx == dy`` and the
    uniform diagonal otherwise. Each iteration fits CCA on the path-matched
    frames, then re-aligns the projected sequences with squared-distance
    DTW. Iteration stops when the path repeats, the relative objective change
    per iteration drops below ``cfg.tol``, ``cfg.max_iters`` is reached, or a
    CCA refit would raise the objective (the fit is then discarded).

    Returns
    -------
    CtwResult
    """
    cfg = cfg or CtwConfig()
    x, y = _check_pair(x, y)
    dx, dy = x.shape[1], y.shape[1]
    dim = cfg.subspace_dim if cfg.subspace_dim is not None else min(10, dx, dy)
    if dim > min(dx, dy):
        raise ValueError(f"subspace_dim {dim} exceeds feature dimensions ({dx}, {dy})")

    if dx == dy:
        path, _ = dtw(x, y)
    else:
        path = WarpPath.diagonal(len(x), len(y))

    history = []
    proj = None
    reason = "max_iters"
    it = 0
    for it in range(1, cfg.max_iters + 1):
        dim_it = min(dim, len(path) - 1)
        candidate = _fit_cca(x, y, path, dim_it, cfg.ridge)
        j_cca = _objective(x, y, path, candidate)
        if history and j_cca > history[-1] * (1 + 1e-12):
            logger.debug("CCA refit raised objective %.6g -> %.6g; stopping", history[-1], j_cca)
            reason = "no_descent"
            it -= 1
            break
        proj = candidate
        history.append(j_cca)

        new_path, _ = dtw(proj.project_x(x), proj.project_y(y), metric="sqeuclidean")
        j_dtw = _objective(x, y, new_path, proj)
        previous = history[-2] if len(history) >= 2 else None
        history.append(j_dtw)
        if new_path == path:
            reason = "path_repeated"
            break
        path = new_path
        if previous is not None:
            if previous == 0.0 or abs(previous - j_dtw) / previous < cfg.tol:
                reason = "tolerance"
                break
    return CtwResult(path=path, objective_history=history, n_iter=it,
                     stop_reason=reason, projection=proj)
