import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import twoview as tv
from twoview.errors import DegenerateInput
from twoview.geometry import (Model, ModelKind, canonicalize, normalize_points,
                              residual, residuals, solve_cubic_real,
                              solve_fundamental_minimal, solve_fundamental_weighted,
                              solve_homography_minimal, solve_homography_weighted)

from conftest import project, random_two_view_rig


def exact_h_pairs(H, rng, n, lo=0.0, hi=100.0):
    p1 = rng.uniform(lo, hi, size=(n, 2))
    p2 = np.array([project(H, p) for p in p1])
    return np.hstack([p1, p2])


class TestNormalization:
    def test_symmetric_square(self):
        sq = np.array([[0, 0, 0, 0], [2, 0, 2, 0], [2, 2, 2, 2], [0, 2, 0, 2]], float)
        pn, tf = normalize_points(sq)
        assert np.allclose(pn[:, :2].mean(axis=0), 0.0, atol=1e-12)
        # centroid (1,1); corners sit at distance sqrt(2) so the scale is 1
        assert np.allclose(tf.T1, [[1, 0, -1], [0, 1, -1], [0, 0, 1]], atol=1e-12)

    def test_already_normalized_cloud_gives_identity(self, rng):
        pts = rng.uniform(0, 50, size=(30, 4))
        pn, _ = normalize_points(pts)
        _, tf2 = normalize_points(pn)
        assert np.allclose(tf2.T1, np.eye(3), atol=1e-9)
        assert np.allclose(tf2.T2, np.eye(3), atol=1e-9)

    def test_idempotence_on_random_points(self, rng):
        pts = rng.uniform(-5, 300, size=(50, 4))
        pn, _ = normalize_points(pts)
        for side in (pn[:, :2], pn[:, 2:]):
            assert np.allclose(side.mean(axis=0), 0, atol=1e-9)
            assert abs(np.mean(np.linalg.norm(side, axis=1)) - np.sqrt(2)) < 1e-9

    def test_postconditions(self, rng):
        pts = rng.uniform(0, 1000, size=(20, 4))
        _, tf = normalize_points(pts)
        assert np.isfinite(np.linalg.inv(tf.T1)).all()
        assert np.isfinite(np.linalg.inv(tf.T2)).all()

    def test_coincident_side_raises(self):
        pts = np.array([[1.0, 1.0, 0, 0], [1.0, 1.0, 2, 2], [1.0, 1.0, 3, 1]])
        with pytest.raises(DegenerateInput):
            normalize_points(pts)

    def test_too_few_points(self):
        with pytest.raises(DegenerateInput):
            normalize_points(np.array([[1.0, 2, 3, 4]]))


class TestCanonicalize:
    @given(st.floats(min_value=1e-6, max_value=1e6),
           st.booleans(), st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_scale_invariance(self, alpha, negate, seed):
        M = np.random.default_rng(seed).normal(size=(3, 3))
        a = -alpha if negate else alpha
        assert np.allclose(canonicalize(a * M), canonicalize(M), atol=1e-12)

    def test_unit_norm_positive_max(self, rng):
        M = canonicalize(rng.normal(size=(3, 3)))
        assert abs(np.linalg.norm(M) - 1.0) < 1e-12
        assert M.flat[np.argmax(np.abs(M))] > 0

    def test_zero_matrix_raises(self):
        with pytest.raises(DegenerateInput):
            canonicalize(np.zeros((3, 3)))


class TestHomographyMinimal:
    def test_identity_map(self):
        sq = np.array([[0, 0, 0, 0], [1, 0, 1, 0], [1, 1, 1, 1], [0, 1, 0, 1]], float)
        m = solve_homography_minimal(sq)
        assert np.allclose(m.M, np.eye(3) / np.sqrt(3), atol=1e-9)

    def test_recovers_scaling_map(self):
        H = np.diag([2.0, 2.0, 1.0])
        sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
        pts = np.hstack([sq, np.array([project(H, p) for p in sq])])
        m = solve_homography_minimal(pts)
        assert np.allclose(m.M, canonicalize(H), atol=1e-9)

    def test_collinear_returns_none(self):
        pts = np.array([[0, 0, 0, 0], [1, 1, 1, 0], [2, 2, 1, 1], [0, 1, 0, 1]], float)
        assert solve_homography_minimal(pts) is None
        # collinear on the second side as well
        pts = np.array([[0, 0, 0, 0], [1, 0, 1, 1], [0, 1, 2, 2], [1, 1, 3, 3]], float)
        assert solve_homography_minimal(pts) is None

    def test_wrong_sample_size(self, rng):
        with pytest.raises(ValueError):
            solve_homography_minimal(rng.uniform(0, 1, size=(5, 4)))

    def test_minimal_exactness_randomized(self, rng):
        # minimal-solver exactness invariant over many random exact samples;
        # near-degenerate draws (thin triangles) do not count as non-degenerate
        def well_posed(pts):
            idx = ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3))
            for side in (pts[:, :2], pts[:, 2:]):
                spread = np.ptp(side, axis=0).max()
                for a, b, c in idx:
                    v1, v2 = side[b] - side[a], side[c] - side[a]
                    if abs(v1[0] * v2[1] - v1[1] * v2[0]) < 1e-3 * spread**2:
                        return False
            return True

        bad = 0
        done = 0
        while done < 1000:
            H = np.eye(3) + 0.3 * rng.normal(size=(3, 3))
            if abs(np.linalg.det(H)) < 0.1:
                continue
            pts = exact_h_pairs(H, rng, 4)
            if not well_posed(pts):
                continue
            done += 1
            m = solve_homography_minimal(pts)
            if m is None or residuals(m, pts).max() > 1e-9:
                bad += 1
        assert bad == 0

    def test_normalization_invariance(self, rng):
        H = np.array([[1.2, 0.1, 30.0], [-0.2, 0.9, -10.0], [1e-4, 2e-4, 1.0]])
        pts = exact_h_pairs(H, rng, 4, lo=10, hi=200)
        base = solve_homography_minimal(pts)
        shifted = pts.copy()
        shifted[:, 0:2] = pts[:, 0:2] * 3.0 + np.array([500.0, -200.0])
        T = np.array([[3.0, 0, 500.0], [0, 3.0, -200.0], [0, 0, 1.0]])
        m2 = solve_homography_minimal(shifted)
        # map the shifted-frame model back into the original frame
        back = canonicalize(m2.M @ T)
        assert np.allclose(back, base.M, atol=1e-7)


class TestHomographyWeighted:
    def test_uniform_weights_match_minimal(self, rng):
        H = np.eye(3) + 0.2 * rng.normal(size=(3, 3))
        pts = exact_h_pairs(H, rng, 4)
        m_min = solve_homography_minimal(pts)
        m_w = solve_homography_weighted(pts, np.ones(4))
        assert np.allclose(m_min.M, m_w.M, atol=1e-9)

    def test_zero_weights_exclude_outliers(self, rng):
        H = np.array([[1.1, 0.05, 12.0], [0.02, 0.95, -4.0], [1e-4, 0, 1.0]])
        inl = exact_h_pairs(H, rng, 100)
        out = rng.uniform(0, 100, size=(20, 4))
        pts = np.vstack([inl, out])
        w = np.concatenate([np.ones(100), np.zeros(20)])
        m = solve_homography_weighted(pts, w)
        assert residuals(m, inl).max() < 1e-9

    def test_weighted_cost_beats_unweighted_oracle(self, rng):
        # dense LS oracle: the weighted solution's weighted algebraic cost
        # must not exceed the unweighted solution's under the same weights
        H = np.eye(3) + 0.1 * rng.normal(size=(3, 3))
        pts = exact_h_pairs(H, rng, 100)
        pts[:, 2:] += rng.normal(0, 2.0, size=(100, 2))
        w = rng.uniform(0.1, 2.0, size=100)
        m_w = solve_homography_weighted(pts, w)
        m_u = solve_homography_weighted(pts, np.ones(100))
        pn, tf = normalize_points(pts)
        x1, y1, x2, y2 = pn[:, 0], pn[:, 1], pn[:, 2], pn[:, 3]
        A = np.zeros((200, 9))
        A[0::2, 0], A[0::2, 1], A[0::2, 2] = -x1, -y1, -1.0
        A[0::2, 6], A[0::2, 7], A[0::2, 8] = x1 * x2, y1 * x2, x2
        A[1::2, 3], A[1::2, 4], A[1::2, 5] = -x1, -y1, -1.0
        A[1::2, 6], A[1::2, 7], A[1::2, 8] = x1 * y2, y1 * y2, y2

        def cost(model):
            Hn = tf.T2 @ model.M @ np.linalg.inv(tf.T1)
            h = Hn.ravel() / np.linalg.norm(Hn)
            return float(np.sum(np.repeat(w, 2) * (A @ h) ** 2))

        assert cost(m_w) <= cost(m_u) + 1e-12

    def test_too_few_positive_weights(self, rng):
        pts = rng.uniform(0, 10, size=(6, 4))
        assert solve_homography_weighted(pts, np.array([1, 1, 1, 0, 0, 0.0])) is None

    def test_bad_weights_raise(self, rng):
        pts = rng.uniform(0, 10, size=(5, 4))
        with pytest.raises(ValueError):
            solve_homography_weighted(pts, -np.ones(5))
        with pytest.raises(ValueError):
            solve_homography_weighted(pts, np.ones(4))


class TestFundamentalMinimal:
    def test_exact_scene_recovery(self, rng):
        F_gt, draw = random_two_view_rig(rng)
        pts = draw(7)
        models = solve_fundamental_minimal(pts)
        assert models is not None
        ones = np.ones((7, 1))
        x1 = np.hstack([pts[:, 0:2], ones])
        x2 = np.hstack([pts[:, 2:4], ones])
        best = min(np.abs(np.sum(x2 * (m.M @ x1.T).T, axis=1)).max() for m in models)
        assert best < 1e-9

    def test_all_candidates_rank_two(self, rng):
        for _ in range(20):
            F_gt, draw = random_two_view_rig(rng)
            models = solve_fundamental_minimal(draw(7))
            assert models is not None
            for m in models:
                assert abs(np.linalg.det(m.M)) < 1e-9
                assert 1 <= len(models) <= 3

    def test_planar_points_do_not_crash(self, rng):
        # correspondences related by a homography: degenerate for epipolar
        # geometry; contract is no crash and rank-2-only output
        H = np.eye(3) + 0.1 * rng.normal(size=(3, 3))
        pts = exact_h_pairs(H, rng, 7)
        models = solve_fundamental_minimal(pts)
        if models is not None:
            for m in models:
                assert abs(np.linalg.det(m.M)) < 1e-9

    def test_wrong_sample_size(self, rng):
        with pytest.raises(ValueError):
            solve_fundamental_minimal(rng.uniform(0, 1, size=(8, 4)))


class TestFundamentalWeighted:
    def test_exact_uniform(self, rng):
        F_gt, draw = random_two_view_rig(rng)
        pts = draw(50)
        m = solve_fundamental_weighted(pts, np.ones(50))
        ones = np.ones((50, 1))
        x1 = np.hstack([pts[:, 0:2], ones])
        x2 = np.hstack([pts[:, 2:4], ones])
        assert np.abs(np.sum(x2 * (m.M @ x1.T).T, axis=1)).max() < 1e-7

    def test_zero_weights_equal_subset_solve(self, rng):
        F_gt, draw = random_two_view_rig(rng)
        inl = draw(40)
        out = rng.uniform(0, 1000, size=(15, 4))
        pts = np.vstack([inl, out])
        w = np.concatenate([np.ones(40), np.zeros(15)])
        m_all = solve_fundamental_weighted(pts, w)
        m_sub = solve_fundamental_weighted(inl, np.ones(40))
        assert np.allclose(m_all.M, m_sub.M, atol=1e-9)

    def test_rank_two_projection(self, rng):
        F_gt, draw = random_two_view_rig(rng)
        pts = draw(30)
        pts[:, 2:] += rng.normal(0, 1.0, size=(30, 2))
        m = solve_fundamental_weighted(pts, np.ones(30))
        s = np.linalg.svd(m.M, compute_uv=False)
        assert s[2] < 1e-15

    def test_uniform_weight_scaling_irrelevant(self, rng):
        F_gt, draw = random_two_view_rig(rng)
        pts = draw(20)
        m1 = solve_fundamental_weighted(pts, np.ones(20))
        m2 = solve_fundamental_weighted(pts, 7.5 * np.ones(20))
        assert np.allclose(m1.M, m2.M, atol=1e-9)


class TestCubic:
    def test_known_roots(self):
        # (x-1)(x-2)(x-3) = x^3 - 6x^2 + 11x - 6
        roots = sorted(solve_cubic_real(1, -6, 11, -6))
        assert np.allclose(roots, [1, 2, 3], atol=1e-9)

    def test_single_real_root(self):
        # (x-2)(x^2+1) = x^3 - 2x^2 + x - 2
        roots = solve_cubic_real(1, -2, 1, -2)
        assert len(roots) == 1
        assert abs(roots[0] - 2.0) < 1e-9

    def test_double_root(self):
        # (x-1)^2 (x-4) = x^3 - 6x^2 + 9x - 4
        roots = sorted(solve_cubic_real(1, -6, 9, -4))
        assert any(abs(r - 1) < 1e-5 for r in roots)
        assert any(abs(r - 4) < 1e-5 for r in roots)

    def test_quadratic_fallback(self):
        roots = sorted(solve_cubic_real(0, 1, -3, 2))
        assert np.allclose(roots, [1, 2], atol=1e-9)

    def test_random_cubics_against_numpy(self, rng):
        for _ in range(200):
            c = rng.normal(size=4)
            mine = np.sort(solve_cubic_real(*c))
            ref = np.roots(c)
            ref = np.sort(ref[np.abs(ref.imag) < 1e-9].real)
            assert mine.size == ref.size
            assert np.allclose(mine, ref, atol=1e-6 * max(1.0, np.abs(ref).max()))


class TestResiduals:
    def test_identity_zero(self):
        m = Model.create(ModelKind.HOMOGRAPHY, np.eye(3))
        assert residual(m, [5.0, 5.0, 5.0, 5.0]) == 0.0

    def test_exact_fundamental_zero(self, rng):
        F, draw = random_two_view_rig(rng)
        m = Model.create(ModelKind.FUNDAMENTAL, F)
        assert residuals(m, draw(30)).max() < 1e-9

    def test_hand_computed_value(self):
        m = Model.create(ModelKind.HOMOGRAPHY, np.diag([2.0, 2.0, 1.0]))
        # Hp1 = (2,2), |Hp1-p2|^2 = 0.25; H^-1 p2 = (1.25,1), err^2 = 0.0625
        want = np.sqrt((0.25 + 0.0625) / 2.0)
        assert abs(residual(m, [1.0, 1.0, 2.5, 2.0]) - want) < 1e-12

    def test_noninvertible_homography_inf(self):
        m = Model(ModelKind.HOMOGRAPHY, np.diag([1.0, 1.0, 0.0]) / np.sqrt(2))
        r = residuals(m, np.array([[1.0, 2, 3, 4], [5, 6, 7, 8]]))
        assert np.all(np.isinf(r))

    def test_continuity_in_model_entries(self, rng):
        for kind in (ModelKind.HOMOGRAPHY, ModelKind.FUNDAMENTAL):
            M = canonicalize(np.eye(3) + 0.2 * rng.normal(size=(3, 3)))
            m = Model(kind, M)
            p = rng.uniform(10, 90, size=4)
            base = residual(m, p)
            E = rng.normal(size=(3, 3))
            E /= np.linalg.norm(E)
            diffs = []
            for eps in (1e-3, 1e-5, 1e-7):
                m2 = Model(kind, M + eps * E)
                diffs.append(abs(residual(m2, p) - base))
            # perturbation response must shrink with eps (about linearly)
            assert diffs[1] < 0.1 * diffs[0] + 1e-12
            assert diffs[2] < 0.1 * diffs[1] + 1e-12


class TestValidation:
    def test_bounds_check(self):
        pts = np.array([[5.0, 5.0, 20.0, 5.0]])
        tv.geometry.validate_points(pts, (10, 10, 30, 10))
        with pytest.raises(tv.DomainError):
            tv.geometry.validate_points(pts, (10, 10, 10, 10))

    def test_nonfinite_rejected(self):
        with pytest.raises(tv.DomainError):
            tv.geometry.validate_points(np.array([[np.nan, 0, 0, 0]]))
