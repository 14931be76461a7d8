"""Compiled inner loops. Callers validate inputs; these assume clean arrays."""

import numpy as np
from numba import njit


@njit(cache=True)
def pava_weighted(y, w, out):
    n = y.shape[0]
    vals = np.empty(n)
    wts = np.empty(n)
    starts = np.empty(n, dtype=np.int64)
    k = -1
    for i in range(n):
        k += 1
        vals[k] = y[i]
        wts[k] = w[i]
        starts[k] = i
        # pool only on strict decrease
        while k > 0 and vals[k - 1] > vals[k]:
            tot = wts[k - 1] + wts[k]
            vals[k - 1] = (wts[k - 1] * vals[k - 1] + wts[k] * vals[k]) / tot
            wts[k - 1] = tot
            k -= 1
    for b in range(k + 1):
        end = starts[b + 1] if b < k else n
        for i in range(starts[b], end):
            out[i] = vals[b]


@njit(cache=True)
def pava_rows(mat, out):
    """Unit-weight PAVA applied independently to every row of ``mat``."""
    nrow, ncol = mat.shape
    vals = np.empty(ncol)
    cnts = np.empty(ncol)
    starts = np.empty(ncol, dtype=np.int64)
    for r in range(nrow):
        k = -1
        for i in range(ncol):
            k += 1
            vals[k] = mat[r, i]
            cnts[k] = 1.0
            starts[k] = i
            while k > 0 and vals[k - 1] > vals[k]:
                tot = cnts[k - 1] + cnts[k]
                vals[k - 1] = (cnts[k - 1] * vals[k - 1] + cnts[k] * vals[k]) / tot
                cnts[k - 1] = tot
                k -= 1
        for b in range(k + 1):
            end = starts[b + 1] if b < k else ncol
            for i in range(starts[b], end):
                out[r, i] = vals[b]


@njit(cache=True)
def kappa_scan(coords, idx, f):
    """Largest max-norm distance over comparable pairs s <= t with f(t) <= f(s).

    Row-major storage guarantees s <= t implies flat(s) <= flat(t), so only
    j > i needs visiting.
    """
    m, d = idx.shape
    best = 0.0
    bi = -1
    bj = -1
    for i in range(m):
        for j in range(i + 1, m):
            if f[j] > f[i]:
                continue
            comparable = True
            for k in range(d):
                if idx[j, k] < idx[i, k]:
                    comparable = False
                    break
            if not comparable:
                continue
            dist = 0.0
            for k in range(d):
                g = coords[j, k] - coords[i, k]
                if g > dist:
                    dist = g
            if dist > best:
                best = dist
                bi = i
                bj = j
    return best, bi, bj


@njit(cache=True)
def local_oscillation(coords, f, radius):
    """max |f(s) - f(t)| over pairs with max-norm distance <= radius."""
    m, d = coords.shape
    best = 0.0
    for i in range(m):
        for j in range(i + 1, m):
            # first coordinate is sorted in storage order
            if coords[j, 0] - coords[i, 0] > radius:
                break
            dist = 0.0
            for k in range(d):
                g = abs(coords[j, k] - coords[i, k])
                if g > dist:
                    dist = g
            if dist <= radius:
                v = abs(f[j] - f[i])
                if v > best:
                    best = v
    return best
