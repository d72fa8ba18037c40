import numpy as np
import pytest

from twoview.errors import (DegenerateGeometry, DomainError, EmptyPointSet,
                            NonInvertibleModel)
from twoview.geometry import Model, ModelKind, canonicalize
from twoview.metrics import GroundTruth, is_failure, rmse_reprojection, sgd_error

from conftest import project, random_rank2

SIZES = (1000.0, 800.0, 1200.0, 900.0)


class TestGroundTruth:
    def test_needs_something(self):
        with pytest.raises(DomainError):
            GroundTruth()
        GroundTruth(labels=np.array([True, False]))


class TestSgd:
    def test_zero_for_identical(self, rng):
        for _ in range(20):
            F = random_rank2(rng)
            assert sgd_error(F, F, SIZES) < 1e-9
            assert sgd_error(F, 3.7 * F, SIZES) < 1e-9

    def test_symmetry(self, rng):
        for _ in range(20):
            F1, F2 = random_rank2(rng), random_rank2(rng)
            assert sgd_error(F1, F2, SIZES) == sgd_error(F2, F1, SIZES)

    def test_scale_invariance(self, rng):
        F1, F2 = random_rank2(rng), random_rank2(rng)
        base = sgd_error(F1, F2, SIZES)
        assert sgd_error(100.0 * F1, F2, SIZES) == pytest.approx(base, rel=1e-9)
        assert sgd_error(F1, -0.01 * F2, SIZES) == pytest.approx(base, rel=1e-9)

    def test_perturbation_sweep_monotone(self, rng):
        # generic rank-2 matrices keep the sweep in the linear-response
        # regime; rig-like F (entries spanning many decades) saturates even
        # at eps = 1e-4 on the canonical scale
        for trial in range(20):
            F = canonicalize(random_rank2(rng))
            E = rng.normal(size=(3, 3))
            E /= np.linalg.norm(E)
            errs = [sgd_error(F, canonicalize(F + eps * E), SIZES)
                    for eps in (1e-4, 1e-3, 1e-2)]
            assert errs[0] < errs[1] < errs[2]

    def test_accepts_models_and_arrays(self, rng):
        F = random_rank2(rng)
        m = Model.create(ModelKind.FUNDAMENTAL, F)
        assert sgd_error(m, F, SIZES) < 1e-9

    def test_degenerate_geometry(self):
        # epipolar "lines" (0, 0, c) never intersect the image rectangle
        F = np.array([[0.0, 0, 0], [0, 0, 0], [0, 0, 1.0]])
        with pytest.raises(DegenerateGeometry):
            sgd_error(F, F, SIZES)

    def test_sample_density_argument(self, rng):
        F1, F2 = random_rank2(rng), random_rank2(rng)
        a = sgd_error(F1, F2, SIZES, samples_per_side=10)
        b = sgd_error(F1, F2, SIZES, samples_per_side=50)
        assert a == pytest.approx(b, rel=0.5)  # same scale, different sampling
        with pytest.raises(DomainError):
            sgd_error(F1, F2, SIZES, samples_per_side=0)


class TestRmseReprojection:
    def test_exact_is_zero(self, rng):
        H = np.array([[1.2, 0.1, 20.0], [-0.05, 0.9, 5.0], [1e-4, 0, 1.0]])
        p1 = rng.uniform(0, 500, size=(40, 2))
        pts = np.hstack([p1, np.array([project(H, p) for p in p1])])
        assert rmse_reprojection(H, pts) < 1e-9

    def test_three_four_five(self):
        pts = np.array([[5.0, 5.0, 8.0, 9.0]])  # offset (3, 4)
        assert rmse_reprojection(np.eye(3), pts) == 5.0

    def test_gaussian_noise_statistics(self, rng):
        # one-directional transfer of exact points with noise only on the
        # image-2 side: RMSE estimates sigma * sqrt(2)
        H = np.array([[1.1, 0.0, 10.0], [0.1, 0.95, -20.0], [0, 1e-4, 1.0]])
        sigma = 2.0
        p1 = rng.uniform(0, 800, size=(1000, 2))
        p2 = np.array([project(H, p) for p in p1]) + rng.normal(0, sigma, (1000, 2))
        rmse = rmse_reprojection(H, np.hstack([p1, p2]))
        assert rmse == pytest.approx(sigma * np.sqrt(2), rel=0.15)

    def test_scale_invariance(self, rng):
        H = np.eye(3) + 0.1 * rng.normal(size=(3, 3))
        pts = rng.uniform(10, 100, size=(20, 4))
        assert rmse_reprojection(H, pts) == pytest.approx(
            rmse_reprojection(-5.0 * H, pts), rel=1e-12)

    def test_permutation_invariance(self, rng):
        H = np.eye(3)
        pts = rng.uniform(0, 100, size=(30, 4))
        a = rmse_reprojection(H, pts)
        b = rmse_reprojection(H, pts[rng.permutation(30)])
        assert a == pytest.approx(b, rel=1e-12)

    def test_noninvertible_raises(self):
        with pytest.raises(NonInvertibleModel):
            rmse_reprojection(np.diag([1.0, 1.0, 0.0]), np.array([[1.0, 2, 3, 4]]))

    def test_empty_raises(self):
        with pytest.raises(EmptyPointSet):
            rmse_reprojection(np.eye(3), np.empty((0, 4)))


class TestIsFailure:
    def test_above_one_percent_diagonal(self):
        assert is_failure(15.0, (1000, 1000)) is True

    def test_zero_is_fine(self):
        assert is_failure(0.0, (1000, 1000)) is False

    def test_boundary_is_not_failure(self):
        diag = float(np.hypot(1000, 1000))
        assert is_failure(0.01 * diag, (1000, 1000)) is False
        assert is_failure(0.01 * diag + 1e-9, (1000, 1000)) is True

    def test_uses_first_image(self):
        assert is_failure(9.0, (100, 100, 5000, 5000)) is True

    def test_negative_error_rejected(self):
        with pytest.raises(DomainError):
            is_failure(-1.0, (100, 100))

    def test_infinite_error_is_failure(self):
        assert is_failure(np.inf, (1000, 1000)) is True
