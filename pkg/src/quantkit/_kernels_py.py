"""Pure numpy/scipy implementations of the hot loops.

Selected at import by :mod:`quantkit.kernels` when the compiled extension is
missing or when ``QUANTKIT_PURE_PYTHON`` is set.
"""
import numpy as np
from scipy.linalg import solveh_banded

CALL, PUT, STOCK, CASH = 0, 1, 2, 3


def hp_bands(n, lam):
    """Bands (main, first, second) of I + lam * D'D with D the second difference."""
    d = np.ones(n)
    e = np.zeros(max(n - 1, 0))
    f = np.zeros(max(n - 2, 0))
    for k in range(n - 2):
        # row k of D touches columns k, k+1, k+2 with (1, -2, 1)
        d[k] += lam
        d[k + 1] += 4.0 * lam
        d[k + 2] += lam
        e[k] += -2.0 * lam
        e[k + 1] += -2.0 * lam
        f[k] += lam
    return d, e, f


def hp_solve(y, lam):
    """Solve (I + lam D'D) x = y for the Hodrick-Prescott trend."""
    y = np.ascontiguousarray(y, dtype=float)
    n = y.shape[0]
    d, e, f = hp_bands(n, lam)
    ab = np.zeros((3, n))
    ab[2] = d
    ab[1, 1:] = e
    ab[0, 2:] = f
    return solveh_banded(ab, y)


def payoff_grid(kinds, qty, strikes, entries, grid):
    """Sum of per-leg expiry kernels times quantity on every grid price."""
    s = np.asarray(grid, dtype=float)
    out = np.zeros_like(s)
    for kind, q, k, s0 in zip(kinds, qty, strikes, entries):
        if kind == CALL:
            out += q * np.maximum(s - k, 0.0)
        elif kind == PUT:
            out += q * np.maximum(k - s, 0.0)
        elif kind == STOCK:
            out += q * (s - s0)
        else:
            out += q
    return out


def pav_decreasing(y, w):
    """Weighted least-squares non-increasing fit by pool-adjacent-violators."""
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    n = y.shape[0]
    vals = []
    wts = []
    cnts = []
    for i in range(n):
        vals.append(y[i])
        wts.append(w[i])
        cnts.append(1)
        # merge while the non-increasing order is violated
        while len(vals) > 1 and vals[-2] < vals[-1]:
            wt = wts[-2] + wts[-1]
            v = (vals[-2] * wts[-2] + vals[-1] * wts[-1]) / wt
            c = cnts[-2] + cnts[-1]
            vals.pop()
            wts.pop()
            cnts.pop()
            vals[-1] = v
            wts[-1] = wt
            cnts[-1] = c
    return np.repeat(np.array(vals), np.array(cnts, dtype=int))
