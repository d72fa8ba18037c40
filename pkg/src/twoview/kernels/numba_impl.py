"""Jit-compiled twins of the numpy kernels (explicit per-point loops)."""

import numpy as np
from numba import njit

_DET_FLOOR = 1e-15
_DEN_FLOOR = 1e-300


@njit(cache=True)
def homography_residuals(H, Hinv, pts):
    n = pts.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        x1 = pts[i, 0]
        y1 = pts[i, 1]
        x2 = pts[i, 2]
        y2 = pts[i, 3]
        d_f = H[2, 0] * x1 + H[2, 1] * y1 + H[2, 2]
        d_b = Hinv[2, 0] * x2 + Hinv[2, 1] * y2 + Hinv[2, 2]
        if abs(d_f) < _DET_FLOOR or abs(d_b) < _DET_FLOOR:
            out[i] = np.inf
            continue
        u = (H[0, 0] * x1 + H[0, 1] * y1 + H[0, 2]) / d_f
        v = (H[1, 0] * x1 + H[1, 1] * y1 + H[1, 2]) / d_f
        ub = (Hinv[0, 0] * x2 + Hinv[0, 1] * y2 + Hinv[0, 2]) / d_b
        vb = (Hinv[1, 0] * x2 + Hinv[1, 1] * y2 + Hinv[1, 2]) / d_b
        e_f = (u - x2) ** 2 + (v - y2) ** 2
        e_b = (ub - x1) ** 2 + (vb - y1) ** 2
        out[i] = np.sqrt(0.5 * (e_f + e_b))
    return out


@njit(cache=True)
def sampson_residuals(F, pts):
    n = pts.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        x1 = pts[i, 0]
        y1 = pts[i, 1]
        x2 = pts[i, 2]
        y2 = pts[i, 3]
        l2x = F[0, 0] * x1 + F[0, 1] * y1 + F[0, 2]
        l2y = F[1, 0] * x1 + F[1, 1] * y1 + F[1, 2]
        l2z = F[2, 0] * x1 + F[2, 1] * y1 + F[2, 2]
        l1x = F[0, 0] * x2 + F[1, 0] * y2 + F[2, 0]
        l1y = F[0, 1] * x2 + F[1, 1] * y2 + F[2, 1]
        s = x2 * l2x + y2 * l2y + l2z
        den = l2x * l2x + l2y * l2y + l1x * l1x + l1y * l1y
        if den < _DEN_FLOOR:
            out[i] = 0.0 if s == 0.0 else np.inf
        else:
            out[i] = abs(s) / np.sqrt(den)
    return out


@njit(cache=True)
def table_interp(r, table, step, tail):
    nbins = table.shape[0] - 1
    cutoff = step * nbins
    n = r.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        ri = r[i]
        if not (ri < cutoff):  # also catches +inf
            out[i] = tail
        elif ri <= 0.0:
            out[i] = table[0]
        else:
            x = ri / step
            j = int(x)
            if j >= nbins:
                j = nbins - 1
            frac = x - j
            out[i] = table[j] * (1.0 - frac) + table[j + 1] * frac
    return out


@njit(cache=True)
def rho_loss_sum(r, rho_table, step, rho_max):
    nbins = rho_table.shape[0] - 1
    cutoff = step * nbins
    total = 0.0
    for i in range(r.shape[0]):
        ri = r[i]
        if not (ri < cutoff):
            total += rho_max
        elif ri <= 0.0:
            total += rho_table[0]
        else:
            x = ri / step
            j = int(x)
            if j >= nbins:
                j = nbins - 1
            frac = x - j
            total += rho_table[j] * (1.0 - frac) + rho_table[j + 1] * frac
    return total


@njit(cache=True)
def count_below(r, threshold):
    c = 0
    for i in range(r.shape[0]):
        if r[i] < threshold:
            c += 1
    return c


@njit(cache=True)
def truncated_quadratic_sum(r, threshold):
    t2 = threshold * threshold
    total = 0.0
    for i in range(r.shape[0]):
        sq = r[i] * r[i]
        total += sq if sq < t2 else t2
    return total
