import numpy as np
import pytest

from magflow import (DistanceMatrix, EvaluationError, PointSet, distance_matrix,
                     load_points_csv, pullback_metric, save_points_csv, similarity)
from magflow.problems import ObjectiveProblem


def identity_problem(m=2, bound=100.0):
    return ObjectiveProblem("ident", m, m, np.full(m, -bound), np.full(m, bound),
                            lambda X: X.copy())


def example1_points(delta):
    # d12 = d13 = 1, d23 = delta, placed symmetrically about the x axis
    a = np.sqrt(1.0 - delta ** 2 / 4.0)
    return np.array([[0.0, 0.0], [a, delta / 2.0], [a, -delta / 2.0]])


class TestPointSet:
    def test_rejects_nan_and_inf(self):
        with pytest.raises(ValueError):
            PointSet(np.array([[0.0, np.nan]]))
        with pytest.raises(ValueError):
            PointSet(np.array([[np.inf, 1.0]]))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            PointSet(np.empty((0, 2)))

    def test_shape_properties(self):
        ps = PointSet(np.zeros((3, 4)))
        assert ps.n == 3 and ps.m == 4

    def test_points_are_read_only(self):
        ps = PointSet(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            ps.points[0, 0] = 1.0


class TestDistanceMatrix:
    def test_single_point(self):
        d = distance_matrix(PointSet(np.array([[1.0, 2.0]])))
        assert d.d.shape == (1, 1) and d.d[0, 0] == 0.0

    def test_line_points(self):
        d = distance_matrix(PointSet(np.array([[0.0], [1.0], [3.0]])))
        assert np.array_equal(d.d, [[0, 1, 3], [1, 0, 2], [3, 2, 0]])

    @pytest.mark.parametrize("delta", [1e-3, 0.5, 1.5])
    def test_isoceles_configuration(self, delta):
        d = distance_matrix(PointSet(example1_points(delta)))
        want = np.array([[0, 1, 1], [1, 0, delta], [1, delta, 0]])
        assert np.abs(d.d - want).max() < 1e-12

    def test_rigid_motion_invariance(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            pts = rng.normal(size=(8, 2))
            theta = rng.uniform(0, 2 * np.pi)
            R = np.array([[np.cos(theta), -np.sin(theta)],
                          [np.sin(theta), np.cos(theta)]])
            moved = pts @ R.T + rng.normal(size=2)
            d0 = distance_matrix(PointSet(pts)).d
            d1 = distance_matrix(PointSet(moved)).d
            assert np.abs(d0 - d1).max() < 1e-9

    def test_triangle_inequality(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            pts = rng.normal(size=(15, 3))
            d = distance_matrix(PointSet(pts)).d
            for j in range(15):
                assert np.all(d <= d[:, j][:, None] + d[j][None, :] + 1e-9)

    def test_exact_symmetry_and_zero_diagonal(self):
        rng = np.random.default_rng(2)
        d = distance_matrix(PointSet(rng.normal(size=(20, 2))))
        assert np.array_equal(d.d, d.d.T)
        assert np.all(np.diag(d.d) == 0.0)

    def test_constructor_rejects_asymmetry(self):
        with pytest.raises(ValueError):
            DistanceMatrix(np.array([[0.0, 1.0], [2.0, 0.0]]))


class TestSimilarity:
    def test_two_points(self):
        d = DistanceMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
        Z = similarity(d, 1.0)
        assert Z.Z[0, 1] == pytest.approx(np.exp(-1.0), abs=1e-15)
        assert Z.Z[0, 0] == 1.0 and Z.Z[1, 1] == 1.0

    def test_line_at_half_scale(self):
        d = distance_matrix(PointSet(np.array([[0.0], [1.0], [3.0]])))
        Z = similarity(d, 0.5)
        assert Z.Z[0, 2] == pytest.approx(np.exp(-1.5), rel=1e-14)

    def test_huge_scale_underflows_to_identity(self):
        d = distance_matrix(PointSet(np.array([[0.0], [1.0], [3.0]])))
        Z = similarity(d, 1e6)
        assert np.abs(Z.Z - np.eye(3)).max() < 1e-300

    def test_monotone_in_scale(self):
        rng = np.random.default_rng(3)
        d = distance_matrix(PointSet(rng.normal(size=(10, 2))))
        Z1 = similarity(d, 0.5).Z
        Z2 = similarity(d, 2.0).Z
        assert np.all(Z1 >= Z2)

    def test_positive_definite_for_euclidean(self):
        rng = np.random.default_rng(4)
        for t in (0.1, 1.0, 10.0):
            d = distance_matrix(PointSet(rng.normal(size=(12, 3))))
            Z = similarity(d, t)
            np.linalg.cholesky(Z.Z)  # raises if not SPD

    @pytest.mark.parametrize("t", [0.0, -1.0, np.nan, np.inf])
    def test_invalid_scale(self, t):
        d = DistanceMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
        with pytest.raises(ValueError):
            similarity(d, t)


class TestPullbackMetric:
    def test_identity_map(self):
        rng = np.random.default_rng(5)
        pts = rng.normal(size=(6, 2))
        ps = PointSet(pts)
        d_direct = distance_matrix(ps).d
        d_pull = pullback_metric(identity_problem(), ps).d
        assert np.abs(d_direct - d_pull).max() < 1e-12

    def test_constant_map(self):
        prob = ObjectiveProblem("const", 2, 2, np.full(2, -10.0), np.full(2, 10.0),
                                lambda X: np.ones_like(X))
        d = pullback_metric(prob, PointSet(np.random.default_rng(0).normal(size=(5, 2))))
        assert np.all(d.d == 0.0)

    def test_linear_doubling(self):
        prob = ObjectiveProblem("double", 1, 1, np.full(1, -10.0), np.full(1, 10.0),
                                lambda X: 2.0 * X)
        d = pullback_metric(prob, PointSet(np.array([[0.0], [1.0]])))
        assert np.array_equal(d.d, [[0.0, 2.0], [2.0, 0.0]])

    def test_nonfinite_values_reported_per_point(self):
        def messy(X):
            Y = X.copy()
            Y[X[:, 0] > 0.5] = np.nan
            return Y
        prob = ObjectiveProblem("messy", 2, 2, np.full(2, -10.0), np.full(2, 10.0), messy)
        with pytest.raises(EvaluationError) as err:
            pullback_metric(prob, PointSet(np.array([[0.0, 0.0], [1.0, 0.0], [0.2, 0.1]])))
        assert err.value.bad_indices == [1]


class TestCsvRoundTrip:
    def test_no_header(self, tmp_path):
        pts = np.random.default_rng(1).normal(size=(7, 3))
        path = tmp_path / "pts.csv"
        save_points_csv(path, pts)
        again = load_points_csv(path)
        assert np.abs(again.points - pts).max() == 0.0

    def test_with_header(self, tmp_path):
        pts = np.random.default_rng(2).normal(size=(4, 2))
        path = tmp_path / "pts.csv"
        save_points_csv(path, pts, header=True)
        assert open(path).readline().strip() == "x1,x2"
        again = load_points_csv(path)
        assert np.abs(again.points - pts).max() == 0.0
