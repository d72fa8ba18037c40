"""Shared helpers for the test suite."""

import numpy as np
import pytest

from twoview.geometry import ModelKind


def project(H, xy):
    """Independent pinhole projection used by test oracles."""
    v = np.asarray(H) @ np.array([xy[0], xy[1], 1.0])
    return v[:2] / v[2]


def random_rank2(rng, scale=1.0):
    """Random rank-2 3x3 matrix via SVD truncation."""
    A = rng.normal(size=(3, 3))
    U, s, Vt = np.linalg.svd(A)
    return scale * (U @ np.diag([s[0], s[1], 0.0]) @ Vt)


def random_two_view_rig(rng, image_sizes=(1000.0, 1000.0, 1000.0, 1000.0)):
    """Independent synthetic rig: returns (F, sampler for exact pairs).

    Kept separate from the package's generator so fundamental-matrix tests
    have an oracle that does not share code with the implementation.
    """
    w1, h1, w2, h2 = image_sizes
    f1, f2 = 1.1 * w1, 1.1 * w2
    K1 = np.array([[f1, 0, w1 / 2], [0, f1, h1 / 2], [0, 0, 1.0]])
    K2 = np.array([[f2, 0, w2 / 2], [0, f2, h2 / 2], [0, 0, 1.0]])
    angles = rng.uniform(-0.2, 0.2, size=3)
    cx, sx = np.cos(angles[0]), np.sin(angles[0])
    cy, sy = np.cos(angles[1]), np.sin(angles[1])
    cz, sz = np.cos(angles[2]), np.sin(angles[2])
    R = (np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
         @ np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
         @ np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]]))
    t = rng.normal(size=3)
    t /= np.linalg.norm(t)
    tx = np.array([[0, -t[2], t[1]], [t[2], 0, -t[0]], [-t[1], t[0], 0.0]])
    F = np.linalg.inv(K2).T @ tx @ R @ np.linalg.inv(K1)
    K1inv = np.linalg.inv(K1)

    def draw_pairs(n):
        out = np.empty((n, 4))
        count = 0
        while count < n:
            u = rng.uniform(0.05 * w1, 0.95 * w1)
            v = rng.uniform(0.05 * h1, 0.95 * h1)
            z = rng.uniform(3.0, 9.0)
            X = z * (K1inv @ np.array([u, v, 1.0]))
            x2 = K2 @ (R @ X + t)
            if x2[2] <= 1e-9:
                continue
            p2 = x2[:2] / x2[2]
            if 0 <= p2[0] <= w2 and 0 <= p2[1] <= h2:
                out[count] = [u, v, p2[0], p2[1]]
                count += 1
        return out

    return F, draw_pairs


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


HOMOGRAPHY = ModelKind.HOMOGRAPHY
FUNDAMENTAL = ModelKind.FUNDAMENTAL
