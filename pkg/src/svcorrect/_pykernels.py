"""Pure numpy DTW recurrences, used when the compiled extension is absent.

Results are bit-identical to ``_ckernels``: every cell is the same single
addition of the local cost to the same minimum.
"""
import numpy as np


def accumulate(cost):
    """Cumulative cost for steps (1,0), (0,1), (1,1), filled by anti-diagonal."""
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    n, m = cost.shape
    acc = np.empty((n, m), dtype=np.float64)
    if n == 0 or m == 0:
        return acc
    acc[0] = np.cumsum(cost[0])
    acc[:, 0] = np.cumsum(cost[:, 0])
    # cumsum is a left fold, the same order as the compiled loop
    for s in range(2, n + m - 1):
        i = np.arange(max(1, s - m + 1), min(n - 1, s - 1) + 1)
        if i.size == 0:
            continue
        j = s - i
        best = np.minimum(np.minimum(acc[i - 1, j - 1], acc[i - 1, j]), acc[i, j - 1])
        acc[i, j] = cost[i, j] + best
    return acc


def backtrack(acc):
    """Optimal path from (0, 0) to (n-1, m-1); ties prefer diagonal, then (1,0)."""
    n, m = acc.shape
    i, j = n - 1, m - 1
    out = [(i, j)]
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag = acc[i - 1, j - 1]
            up = acc[i - 1, j]
            left = acc[i, j - 1]
            if diag <= up and diag <= left:
                i -= 1
                j -= 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        out.append((i, j))
    return np.array(out[::-1], dtype=np.intp)
