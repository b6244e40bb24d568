# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the sequential loops in :mod:`quantkit._kernels_py`."""
import numpy as np

cdef int CALL = 0
cdef int PUT = 1
cdef int STOCK = 2


def hp_bands(Py_ssize_t n, double lam):
    cdef double[::1] d = np.ones(n)
    cdef double[::1] e = np.zeros(max(n - 1, 0))
    cdef double[::1] f = np.zeros(max(n - 2, 0))
    cdef Py_ssize_t k
    for k in range(n - 2):
        d[k] += lam
        d[k + 1] += 4.0 * lam
        d[k + 2] += lam
        e[k] += -2.0 * lam
        e[k + 1] += -2.0 * lam
        f[k] += lam
    return np.asarray(d), np.asarray(e), np.asarray(f)


def hp_solve(y_in, double lam):
    """Banded LDL' solve of (I + lam D'D) x = y."""
    cdef double[::1] y = np.ascontiguousarray(y_in, dtype=np.float64)
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t i
    d_arr, e_arr, f_arr = hp_bands(n, lam)
    cdef double[::1] d = d_arr
    cdef double[::1] e = e_arr
    cdef double[::1] f = f_arr
    cdef double[::1] dd = np.empty(n)
    cdef double[::1] l1 = np.zeros(n)
    cdef double[::1] l2 = np.zeros(n)
    cdef double[::1] z = np.empty(n)
    cdef double[::1] x = np.empty(n)
    cdef double v
    for i in range(n):
        v = d[i]
        if i >= 1:
            v -= l1[i - 1] * l1[i - 1] * dd[i - 1]
        if i >= 2:
            v -= l2[i - 2] * l2[i - 2] * dd[i - 2]
        dd[i] = v
        if i + 1 < n:
            v = e[i]
            if i >= 1:
                v -= l2[i - 1] * l1[i - 1] * dd[i - 1]
            l1[i] = v / dd[i]
        if i + 2 < n:
            l2[i] = f[i] / dd[i]
    for i in range(n):
        v = y[i]
        if i >= 1:
            v -= l1[i - 1] * z[i - 1]
        if i >= 2:
            v -= l2[i - 2] * z[i - 2]
        z[i] = v
    for i in range(n):
        z[i] /= dd[i]
    for i in range(n - 1, -1, -1):
        v = z[i]
        if i + 1 < n:
            v -= l1[i] * x[i + 1]
        if i + 2 < n:
            v -= l2[i] * x[i + 2]
        x[i] = v
    return np.asarray(x)


def payoff_grid(kinds_in, qty_in, strikes_in, entries_in, grid_in):
    cdef long[::1] kinds = np.ascontiguousarray(kinds_in, dtype=np.int64)
    cdef double[::1] qty = np.ascontiguousarray(qty_in, dtype=np.float64)
    cdef double[::1] strikes = np.ascontiguousarray(strikes_in, dtype=np.float64)
    cdef double[::1] entries = np.ascontiguousarray(entries_in, dtype=np.float64)
    cdef double[::1] grid = np.ascontiguousarray(grid_in, dtype=np.float64)
    cdef Py_ssize_t m = grid.shape[0]
    cdef Py_ssize_t nl = kinds.shape[0]
    cdef double[::1] out = np.zeros(m)
    cdef Py_ssize_t i, j
    cdef double s, acc, u
    for i in range(m):
        s = grid[i]
        acc = 0.0
        for j in range(nl):
            if kinds[j] == CALL:
                u = s - strikes[j]
                if u > 0.0:
                    acc += qty[j] * u
            elif kinds[j] == PUT:
                u = strikes[j] - s
                if u > 0.0:
                    acc += qty[j] * u
            elif kinds[j] == STOCK:
                acc += qty[j] * (s - entries[j])
            else:
                acc += qty[j]
        out[i] = acc
    return np.asarray(out)


def pav_decreasing(y_in, w_in):
    cdef double[::1] y = np.ascontiguousarray(y_in, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef Py_ssize_t n = y.shape[0]
    cdef double[::1] vals = np.empty(n)
    cdef double[::1] wts = np.empty(n)
    cdef long[::1] cnts = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t top = 0
    cdef Py_ssize_t i, j, k
    cdef double wt
    for i in range(n):
        vals[top] = y[i]
        wts[top] = w[i]
        cnts[top] = 1
        top += 1
        while top > 1 and vals[top - 2] < vals[top - 1]:
            wt = wts[top - 2] + wts[top - 1]
            vals[top - 2] = (vals[top - 2] * wts[top - 2] + vals[top - 1] * wts[top - 1]) / wt
            wts[top - 2] = wt
            cnts[top - 2] += cnts[top - 1]
            top -= 1
    cdef double[::1] out = np.empty(n)
    k = 0
    for i in range(top):
        for j in range(cnts[i]):
            out[k] = vals[i]
            k += 1
    return np.asarray(out)
