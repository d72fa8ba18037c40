"""Ground-truth comparison metrics: SGD for F, RMSE re-projection for H.

The symmetric geometric distance compares two fundamental matrices without
correspondences: border points of each image are turned into virtual pairs
via one matrix's epipolar geometry (the partner point is the midpoint of the
epipolar line clipped to the other image), and the pairs' symmetric epipolar
distances are averaged under the other matrix, in both generator/measurer
roles.  Border samples whose epipolar line misses the opposite image are
skipped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateGeometry, DomainError, EmptyPointSet, NonInvertibleModel
from .geometry import H_DET_FLOOR, Model, as_points

DEFAULT_BORDER_SAMPLES = 25
_EPS = 1e-12


@dataclass(frozen=True)
class GroundTruth:
    """Reference data for evaluation: a model, inlier labels, or both."""

    model: Optional[Model] = None
    labels: Optional[np.ndarray] = None
    image_sizes: Optional[tuple] = None

    def __post_init__(self):
        if self.model is None and self.labels is None:
            raise DomainError("ground truth needs a model or inlier labels")


def _as_matrix(model) -> np.ndarray:
    M = model.M if isinstance(model, Model) else np.asarray(model, dtype=np.float64)
    if M.shape != (3, 3):
        raise DomainError(f"expected a 3x3 model, got shape {M.shape}")
    return M


def _border_points(w: float, h: float, per_side: int) -> np.ndarray:
    ts = np.arange(per_side, dtype=np.float64) / per_side
    zeros = np.zeros(per_side)
    return np.vstack([
        np.column_stack([ts * w, zeros]),
        np.column_stack([np.full(per_side, w), ts * h]),
        np.column_stack([w - ts * w, np.full(per_side, h)]),
        np.column_stack([zeros, h - ts * h]),
    ])


def _clip_line(line: np.ndarray, w: float, h: float):
    """Endpoints of the line's chord through [0,w]x[0,h], or None if it misses."""
    a, b, c = line
    hits = []
    if abs(b) > _EPS:
        for x in (0.0, w):
            y = -(a * x + c) / b
            if -_EPS <= y <= h + _EPS:
                hits.append((x, min(max(y, 0.0), h)))
    if abs(a) > _EPS:
        for y in (0.0, h):
            x = -(b * y + c) / a
            if -_EPS <= x <= w + _EPS:
                hits.append((min(max(x, 0.0), w), y))
    if len(hits) < 2:
        return None
    pts = np.array(hits)
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=2)
    i, j = np.unravel_index(int(np.argmax(d2)), d2.shape)
    if d2[i, j] < _EPS:
        return None
    return pts[i], pts[j]


def _line_distance(point_xy, line) -> float:
    a, b, c = line
    norm = float(np.hypot(a, b))
    if norm < _EPS:
        return np.inf
    return abs(a * point_xy[0] + b * point_xy[1] + c) / norm


def _pair_distance(p_xy, q_xy, F) -> float:
    """Symmetric epipolar distance of the virtual pair (p in image 1, q in image 2)."""
    p = np.array([p_xy[0], p_xy[1], 1.0])
    q = np.array([q_xy[0], q_xy[1], 1.0])
    return 0.5 * (_line_distance(q_xy, F @ p) + _line_distance(p_xy, F.T @ q))


def _directed_sgd(F_gen: np.ndarray, F_meas: np.ndarray, image_sizes,
                  per_side: int):
    """Sum/count of pair distances for virtual pairs generated with F_gen."""
    w1, h1, w2, h2 = image_sizes
    total = 0.0
    count = 0
    for p_xy in _border_points(w1, h1, per_side):
        seg = _clip_line(F_gen @ np.array([p_xy[0], p_xy[1], 1.0]), w2, h2)
        if seg is None:
            continue
        q_xy = 0.5 * (seg[0] + seg[1])
        total += _pair_distance(p_xy, q_xy, F_meas)
        count += 1
    for q_xy in _border_points(w2, h2, per_side):
        seg = _clip_line(F_gen.T @ np.array([q_xy[0], q_xy[1], 1.0]), w1, h1)
        if seg is None:
            continue
        p_xy = 0.5 * (seg[0] + seg[1])
        total += _pair_distance(p_xy, q_xy, F_meas)
        count += 1
    return total, count


def sgd_error(F_est, F_gt, image_sizes,
              samples_per_side: int = DEFAULT_BORDER_SAMPLES) -> float:
    """Symmetric geometric distance between two fundamental matrices, in pixels.

    Zero when the matrices agree up to scale; symmetric in its arguments by
    construction.  Raises DegenerateGeometry when no border sample yields a
    virtual pair.
    """
    Fe = _as_matrix(F_est)
    Fg = _as_matrix(F_gt)
    if samples_per_side < 1:
        raise DomainError("samples_per_side must be >= 1")
    s1, c1 = _directed_sgd(Fg, Fe, image_sizes, samples_per_side)
    s2, c2 = _directed_sgd(Fe, Fg, image_sizes, samples_per_side)
    if c1 + c2 == 0:
        raise DegenerateGeometry("every epipolar line missed the opposite image")
    return (s1 + s2) / (c1 + c2)


def rmse_reprojection(H_est, gt_inliers) -> float:
    """RMSE of the one-directional transfer error over ground-truth inliers.

    Transfers image-1 points through H and measures pixel distance to their
    image-2 partners (first-to-second direction only).
    """
    H = _as_matrix(H_est)
    pts = as_points(gt_inliers)
    if pts.shape[0] == 0:
        raise EmptyPointSet("rmse_reprojection needs at least one ground-truth inlier")
    if abs(np.linalg.det(H)) < H_DET_FLOOR * float(np.linalg.norm(H)) ** 3:
        raise NonInvertibleModel("homography determinant below invertibility floor")
    ones = np.ones((pts.shape[0], 1))
    proj = (H @ np.hstack([pts[:, 0:2], ones]).T).T
    proj = proj[:, 0:2] / proj[:, 2:3]
    sq = np.sum((proj - pts[:, 2:4]) ** 2, axis=1)
    return float(np.sqrt(np.mean(sq)))


def is_failure(error: float, image_sizes) -> bool:
    """True when the error exceeds 1% of the first image's diagonal (strictly)."""
    if error < 0.0:
        raise DomainError("error must be nonnegative")
    w1, h1 = image_sizes[0], image_sizes[1]
    return bool(error > 0.01 * float(np.hypot(w1, h1)))
