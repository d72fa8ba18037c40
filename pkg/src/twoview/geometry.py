"""Two-view domain types, Hartley conditioning, minimal/weighted solvers, residuals.

Correspondences are (N, 4) float64 arrays with columns [x1, y1, x2, y2]
(a point in image 1 and its match in image 2).  Models are 3x3 homogeneous
matrices canonicalized to unit Frobenius norm with the largest-magnitude
entry positive, so they compare deterministically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional

import numpy as np

from . import kernels
from .errors import DegenerateInput, DomainError

_RANK_TOL = 1e-10
_COLLINEAR_TOL = 1e-9
_DEGENERATE_SPREAD = 1e-12
H_DET_FLOOR = 1e-12


class Correspondence(NamedTuple):
    """A single point pair; bulk APIs use (N, 4) arrays instead."""

    u1: float
    v1: float
    u2: float
    v2: float


class ModelKind(Enum):
    HOMOGRAPHY = "homography"
    FUNDAMENTAL = "fundamental"

    @property
    def min_sample_size(self) -> int:
        return 4 if self is ModelKind.HOMOGRAPHY else 7

    @property
    def min_nonminimal_size(self) -> int:
        """Smallest point count the weighted (non-minimal) solver accepts."""
        return 4 if self is ModelKind.HOMOGRAPHY else 8


def canonicalize(M: np.ndarray) -> np.ndarray:
    """Scale to unit Frobenius norm and flip sign so the largest-|.| entry is positive."""
    M = np.asarray(M, dtype=np.float64)
    nrm = float(np.linalg.norm(M))
    if not np.isfinite(nrm) or nrm == 0.0:
        raise DegenerateInput("matrix has zero or non-finite norm")
    M = M / nrm
    if M.flat[int(np.argmax(np.abs(M)))] < 0.0:
        M = -M
    return M


@dataclass(frozen=True)
class Model:
    """A 3x3 two-view model (homography or fundamental matrix), canonicalized."""

    kind: ModelKind
    M: np.ndarray

    @classmethod
    def create(cls, kind: ModelKind, M: np.ndarray) -> "Model":
        return cls(kind, canonicalize(M))


@dataclass(frozen=True)
class NormalizationTransform:
    """Per-image similarity transforms taking raw pixels to conditioned coordinates."""

    T1: np.ndarray
    T2: np.ndarray


def as_points(points) -> np.ndarray:
    """Coerce correspondences to a C-contiguous (N, 4) float64 array."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim == 1 and pts.shape[0] == 4:
        pts = pts.reshape(1, 4)
    if pts.ndim != 2 or pts.shape[1] != 4:
        raise ValueError(f"expected (N, 4) correspondences, got shape {pts.shape}")
    return pts


def validate_points(pts: np.ndarray, image_sizes=None) -> np.ndarray:
    """Ingestion check: finite coordinates, inside the images when sizes are given."""
    pts = as_points(pts)
    if not np.all(np.isfinite(pts)):
        raise DomainError("correspondences contain non-finite coordinates")
    if image_sizes is not None:
        w1, h1, w2, h2 = image_sizes
        hi = np.array([w1, h1, w2, h2], dtype=np.float64)
        if np.any(pts < 0.0) or np.any(pts > hi):
            raise DomainError("correspondence outside the image bounds")
    return pts


def _hartley(xy: np.ndarray):
    """Similarity transform sending a 2D cloud to zero centroid, mean norm sqrt(2)."""
    c = xy.mean(axis=0)
    d = float(np.mean(np.linalg.norm(xy - c, axis=1)))
    if d < _DEGENERATE_SPREAD * (1.0 + float(np.abs(c).max())):
        raise DegenerateInput("all points on one side coincide")
    s = math.sqrt(2.0) / d
    T = np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])
    return (xy - c) * s, T


def normalize_points(points) -> tuple[np.ndarray, NormalizationTransform]:
    """Hartley-normalize both sides of a correspondence set.

    Returns the conditioned (N, 4) array and the two similarity transforms.
    Raises DegenerateInput when either side's points all coincide.
    """
    pts = as_points(points)
    if pts.shape[0] < 2:
        raise DegenerateInput("need at least 2 correspondences to normalize")
    n1, T1 = _hartley(pts[:, 0:2])
    n2, T2 = _hartley(pts[:, 2:4])
    return np.hstack([n1, n2]), NormalizationTransform(T1, T2)


def _any_collinear(xy: np.ndarray) -> bool:
    """True if any 3 of the 4 points are collinear (relative-area test)."""
    scale = float(np.ptp(xy, axis=0).max())
    tol = _COLLINEAR_TOL * max(scale, 1.0) ** 2
    idx = ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3))
    for a, b, c in idx:
        v1 = xy[b] - xy[a]
        v2 = xy[c] - xy[a]
        if abs(v1[0] * v2[1] - v1[1] * v2[0]) <= tol:
            return True
    return False


def _dlt_homography_rows(pts: np.ndarray, weights=None) -> np.ndarray:
    """Stack the 2N x 9 DLT design matrix, rows scaled by sqrt(weight)."""
    n = pts.shape[0]
    x1, y1, x2, y2 = pts[:, 0], pts[:, 1], pts[:, 2], pts[:, 3]
    A = np.zeros((2 * n, 9))
    A[0::2, 0] = -x1
    A[0::2, 1] = -y1
    A[0::2, 2] = -1.0
    A[0::2, 6] = x1 * x2
    A[0::2, 7] = y1 * x2
    A[0::2, 8] = x2
    A[1::2, 3] = -x1
    A[1::2, 4] = -y1
    A[1::2, 5] = -1.0
    A[1::2, 6] = x1 * y2
    A[1::2, 7] = y1 * y2
    A[1::2, 8] = y2
    if weights is not None:
        sw = np.sqrt(weights)
        A *= np.repeat(sw, 2)[:, None]
    return A


def _null_vector(A: np.ndarray, rank_needed: int):
    """Smallest right singular vector, or None when rank < rank_needed."""
    try:
        _, s, Vt = np.linalg.svd(A)
    except np.linalg.LinAlgError:
        return None
    if s[rank_needed - 1] < _RANK_TOL * max(s[0], 1e-30):
        return None
    return Vt[-1]


def solve_homography_minimal(sample) -> Optional[Model]:
    """Normalized 4-point homography. Returns None on degenerate samples."""
    pts = as_points(sample)
    if pts.shape[0] != 4:
        raise ValueError("minimal homography sample must have exactly 4 correspondences")
    if _any_collinear(pts[:, 0:2]) or _any_collinear(pts[:, 2:4]):
        return None
    try:
        pn, tf = normalize_points(pts)
    except DegenerateInput:
        return None
    h = _null_vector(_dlt_homography_rows(pn), rank_needed=8)
    if h is None:
        return None
    Hn = h.reshape(3, 3)
    H = np.linalg.inv(tf.T2) @ Hn @ tf.T1
    return Model.create(ModelKind.HOMOGRAPHY, H)


def solve_homography_weighted(points, weights) -> Optional[Model]:
    """Weighted DLT over >= 4 positively weighted correspondences.

    Minimizes sum w_i |A_i h|^2 with |h| = 1 on Hartley-normalized points.
    Zero-weight points are excluded entirely; returns None when the weighted
    design matrix has rank < 8.
    """
    pts = as_points(points)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (pts.shape[0],):
        raise ValueError("weights must be one value per correspondence")
    if not np.all(np.isfinite(w)) or np.any(w < 0.0):
        raise ValueError("weights must be finite and nonnegative")
    mask = w > 0.0
    if int(mask.sum()) < 4:
        return None
    pts, w = pts[mask], w[mask]
    try:
        pn, tf = normalize_points(pts)
    except DegenerateInput:
        return None
    h = _null_vector(_dlt_homography_rows(pn, w), rank_needed=8)
    if h is None:
        return None
    H = np.linalg.inv(tf.T2) @ h.reshape(3, 3) @ tf.T1
    return Model.create(ModelKind.HOMOGRAPHY, H)


def _epipolar_rows(pts: np.ndarray, weights=None) -> np.ndarray:
    """N x 9 design matrix for x2^T F x1 = 0, rows scaled by sqrt(weight)."""
    x1, y1, x2, y2 = pts[:, 0], pts[:, 1], pts[:, 2], pts[:, 3]
    one = np.ones_like(x1)
    A = np.column_stack([x2 * x1, x2 * y1, x2, y2 * x1, y2 * y1, y2, x1, y1, one])
    if weights is not None:
        A *= np.sqrt(weights)[:, None]
    return A


def solve_cubic_real(c3: float, c2: float, c1: float, c0: float,
                     disc_tol: float = 1e-12) -> list[float]:
    """Real roots of c3 x^3 + c2 x^2 + c1 x + c0, closed form.

    Falls back to quadratic/linear when leading coefficients vanish.  Near the
    repeated-root boundary (|discriminant| <= disc_tol on the depressed,
    scale-normalized cubic) the multiple-root formulas are used.
    """
    scale = max(abs(c3), abs(c2), abs(c1), abs(c0))
    if scale == 0.0:
        return []
    c3, c2, c1, c0 = c3 / scale, c2 / scale, c1 / scale, c0 / scale
    if abs(c3) < 1e-14:
        if abs(c2) < 1e-14:
            if abs(c1) < 1e-14:
                return []
            return [-c0 / c1]
        disc = c1 * c1 - 4.0 * c2 * c0
        if disc < 0.0:
            return []
        sq = math.sqrt(disc)
        return [(-c1 + sq) / (2.0 * c2), (-c1 - sq) / (2.0 * c2)]
    a = c2 / c3
    b = c1 / c3
    c = c0 / c3
    # depressed cubic y^3 + p y + q with x = y - a/3
    p = b - a * a / 3.0
    q = 2.0 * a**3 / 27.0 - a * b / 3.0 + c
    shift = -a / 3.0
    disc = -4.0 * p**3 - 27.0 * q * q
    if abs(disc) <= disc_tol:
        if abs(p) < disc_tol and abs(q) < disc_tol:
            return [shift]  # triple root
        # repeated-root boundary: simple root 3q/p, double root -3q/(2p)
        r1 = 3.0 * q / p
        r2 = -3.0 * q / (2.0 * p)
        return [r1 + shift, r2 + shift]
    if disc > 0.0:
        # three distinct real roots: trigonometric form
        m = 2.0 * math.sqrt(-p / 3.0)
        theta = math.acos(max(-1.0, min(1.0, 3.0 * q / (p * m))))
        return [m * math.cos((theta - 2.0 * math.pi * k) / 3.0) + shift for k in range(3)]
    # one real root: Cardano
    half_q = q / 2.0
    root = math.sqrt(half_q * half_q + p**3 / 27.0)
    u = math.copysign(abs(-half_q + root) ** (1.0 / 3.0), -half_q + root)
    v = math.copysign(abs(-half_q - root) ** (1.0 / 3.0), -half_q - root)
    return [u + v + shift]


def _det3(M: np.ndarray) -> float:
    return (
        M[0, 0] * (M[1, 1] * M[2, 2] - M[1, 2] * M[2, 1])
        - M[0, 1] * (M[1, 0] * M[2, 2] - M[1, 2] * M[2, 0])
        + M[0, 2] * (M[1, 0] * M[2, 1] - M[1, 1] * M[2, 0])
    )


def solve_fundamental_minimal(sample) -> Optional[list[Model]]:
    """Seven-point fundamental-matrix solver; 1-3 rank-2 candidates or None.

    Builds the 2D null space of the 7x9 epipolar design matrix and finds the
    mixtures lam*F1 + (1-lam)*F2 with zero determinant via the cubic's closed
    form.  Candidates failing the rank-2 check after denormalization are
    dropped.
    """
    pts = as_points(sample)
    if pts.shape[0] != 7:
        raise ValueError("minimal fundamental sample must have exactly 7 correspondences")
    try:
        pn, tf = normalize_points(pts)
    except DegenerateInput:
        return None
    A = _epipolar_rows(pn)
    try:
        _, s, Vt = np.linalg.svd(A)
    except np.linalg.LinAlgError:
        return None
    if s[6] < _RANK_TOL * max(s[0], 1e-30):
        return None  # null space dimension > 2
    F1 = Vt[7].reshape(3, 3)
    F2 = Vt[8].reshape(3, 3)
    # det(lam F1 + (1-lam) F2) is cubic in lam; interpolate it exactly from
    # four evaluations instead of expanding symbolically.
    d = [_det3(lam * F1 + (1.0 - lam) * F2) for lam in (0.0, 1.0, -1.0, 2.0)]
    c0 = d[0]
    c2 = 0.5 * (d[1] + d[2]) - c0
    rhs1 = d[1] - c0 - c2
    rhs2 = d[3] - c0 - 4.0 * c2
    c3 = (rhs2 - 2.0 * rhs1) / 6.0
    c1 = rhs1 - c3
    models = []
    for lam in solve_cubic_real(c3, c2, c1, c0):
        Fn = lam * F1 + (1.0 - lam) * F2
        F = tf.T2.T @ Fn @ tf.T1
        try:
            model = Model.create(ModelKind.FUNDAMENTAL, F)
        except DegenerateInput:
            continue
        if abs(_det3(model.M)) < 1e-9:
            models.append(model)
    return models if models else None


def solve_fundamental_weighted(points, weights) -> Optional[Model]:
    """Weighted 8-point solve with SVD rank-2 projection; None when rank-deficient."""
    pts = as_points(points)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (pts.shape[0],):
        raise ValueError("weights must be one value per correspondence")
    if not np.all(np.isfinite(w)) or np.any(w < 0.0):
        raise ValueError("weights must be finite and nonnegative")
    mask = w > 0.0
    if int(mask.sum()) < 8:
        return None
    pts, w = pts[mask], w[mask]
    try:
        pn, tf = normalize_points(pts)
    except DegenerateInput:
        return None
    f = _null_vector(_epipolar_rows(pn, w), rank_needed=8)
    if f is None:
        return None
    Fn = f.reshape(3, 3)
    U, s, Vt = np.linalg.svd(Fn)
    Fn = U @ np.diag([s[0], s[1], 0.0]) @ Vt
    F = tf.T2.T @ Fn @ tf.T1
    try:
        return Model.create(ModelKind.FUNDAMENTAL, F)
    except DegenerateInput:
        return None


def solve_minimal(kind: ModelKind, sample) -> list[Model]:
    """Kind-dispatched minimal solve; always returns a (possibly empty) list."""
    if kind is ModelKind.HOMOGRAPHY:
        m = solve_homography_minimal(sample)
        return [m] if m is not None else []
    models = solve_fundamental_minimal(sample)
    return models if models is not None else []


def solve_weighted(kind: ModelKind, points, weights) -> Optional[Model]:
    if kind is ModelKind.HOMOGRAPHY:
        return solve_homography_weighted(points, weights)
    return solve_fundamental_weighted(points, weights)


def residuals(model: Model, points) -> np.ndarray:
    """Point-to-model residuals in pixels: symmetric transfer error for
    homographies, Sampson distance for fundamental matrices.

    A homography with |det| < 1e-12 yields +inf for every point (the
    non-invertible sentinel, beyond any threshold).
    """
    pts = as_points(points)
    if model.kind is ModelKind.HOMOGRAPHY:
        det = _det3(model.M)
        if abs(det) < H_DET_FLOOR:
            return np.full(pts.shape[0], np.inf)
        Hinv = np.linalg.inv(model.M)
        return kernels.homography_residuals(model.M, Hinv, pts)
    return kernels.sampson_residuals(np.ascontiguousarray(model.M), pts)


def residual(model: Model, p) -> float:
    """Single-correspondence convenience wrapper around :func:`residuals`."""
    return float(residuals(model, np.asarray(p, dtype=np.float64).reshape(1, 4))[0])
