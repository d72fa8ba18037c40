"""Pure-numpy implementations of the per-point hot loops.

Every function here has a jit-compiled twin in ``numba_impl``; the two must
agree to floating-point noise.  Inputs are C-contiguous float64 arrays,
correspondences are (N, 4) with columns [x1, y1, x2, y2].
"""

import numpy as np

_DET_FLOOR = 1e-15
_DEN_FLOOR = 1e-300


def homography_residuals(H, Hinv, pts):
    """Symmetric transfer error sqrt((|Hp1-p2|^2 + |H^-1 p2 - p1|^2) / 2)."""
    x1, y1, x2, y2 = pts[:, 0], pts[:, 1], pts[:, 2], pts[:, 3]
    d_f = H[2, 0] * x1 + H[2, 1] * y1 + H[2, 2]
    d_b = Hinv[2, 0] * x2 + Hinv[2, 1] * y2 + Hinv[2, 2]
    bad = (np.abs(d_f) < _DET_FLOOR) | (np.abs(d_b) < _DET_FLOOR)
    d_f = np.where(bad, 1.0, d_f)
    d_b = np.where(bad, 1.0, d_b)
    u = (H[0, 0] * x1 + H[0, 1] * y1 + H[0, 2]) / d_f
    v = (H[1, 0] * x1 + H[1, 1] * y1 + H[1, 2]) / d_f
    ub = (Hinv[0, 0] * x2 + Hinv[0, 1] * y2 + Hinv[0, 2]) / d_b
    vb = (Hinv[1, 0] * x2 + Hinv[1, 1] * y2 + Hinv[1, 2]) / d_b
    e_f = (u - x2) ** 2 + (v - y2) ** 2
    e_b = (ub - x1) ** 2 + (vb - y1) ** 2
    r = np.sqrt(0.5 * (e_f + e_b))
    return np.where(bad, np.inf, r)


def sampson_residuals(F, pts):
    """First-order (Sampson) point-to-epipolar-geometry distance, in pixels."""
    x1, y1, x2, y2 = pts[:, 0], pts[:, 1], pts[:, 2], pts[:, 3]
    l2x = F[0, 0] * x1 + F[0, 1] * y1 + F[0, 2]
    l2y = F[1, 0] * x1 + F[1, 1] * y1 + F[1, 2]
    l2z = F[2, 0] * x1 + F[2, 1] * y1 + F[2, 2]
    l1x = F[0, 0] * x2 + F[1, 0] * y2 + F[2, 0]
    l1y = F[0, 1] * x2 + F[1, 1] * y2 + F[2, 1]
    s = x2 * l2x + y2 * l2y + l2z
    den = l2x**2 + l2y**2 + l1x**2 + l1y**2
    tiny = den < _DEN_FLOOR
    r = np.abs(s) / np.sqrt(np.where(tiny, 1.0, den))
    return np.where(tiny, np.where(s == 0.0, 0.0, np.inf), r)


def table_interp(r, table, step, tail):
    """Linear interpolation of a uniform table on [0, step*(len-1)].

    Queries at or beyond the table end (including +inf) return ``tail``;
    negative queries clamp to the first entry.
    """
    nbins = table.shape[0] - 1
    cutoff = step * nbins
    x = np.clip(r, 0.0, cutoff) / step
    j = np.minimum(x.astype(np.int64), nbins - 1)
    frac = x - j
    vals = table[j] * (1.0 - frac) + table[j + 1] * frac
    return np.where(r < cutoff, vals, tail)


def rho_loss_sum(r, rho_table, step, rho_max):
    """Total M-estimator loss: sum of interpolated rho over residuals."""
    return float(np.sum(table_interp(r, rho_table, step, rho_max)))


def count_below(r, threshold):
    """Number of residuals strictly below the threshold."""
    return int(np.count_nonzero(r < threshold))


def truncated_quadratic_sum(r, threshold):
    """Sum of min(r^2, threshold^2); the truncated-quadratic scoring cost."""
    t2 = threshold * threshold
    return float(np.sum(np.minimum(r * r, t2)))
