import numpy as np
import pytest

from magflow import (DistanceMatrix, IllConditionedError, MagflowError,
                     PointSet, ScaleSearchError, diagonal_cutoff,
                     distance_matrix, diversity_order_q, erode, magnitude_of,
                     magnitude_profile, maximum_diversity_distribution,
                     positive_cutoff, similarity, solve_coweighting,
                     solve_weighting, spread, zero_scale_weighting)

GOLDEN_LINE_TD = np.log((np.sqrt(5.0) + 1.0) / 2.0)  # row 2 solves q + q^2 = 1


def example1_closed_form(delta, t):
    D = np.exp((delta + 2) * t) - 2 * np.exp(delta * t) + np.exp(2 * t)
    w1 = (np.exp((delta + 2) * t) - 2 * np.exp((delta + 1) * t) + np.exp(2 * t)) / D
    w23 = (np.exp((delta + 2) * t) - np.exp((delta + 1) * t)) / D
    return w1, w23


def isoceles_distance(delta):
    return DistanceMatrix(np.array([[0, 1, 1], [1, 0, delta], [1, delta, 0]], dtype=float))


def line_distance():
    return distance_matrix(PointSet(np.array([[0.0], [1.0], [3.0]])))


def square_plus_center():
    pts = np.array([[0, 0], [1, 0], [0, 1], [1, 1], [0.5, 0.5]], dtype=float)
    return distance_matrix(PointSet(pts))


def random_set(rng, n_max=20, m=2, n_min=3):
    n = int(rng.integers(n_min, n_max + 1))
    return distance_matrix(PointSet(rng.normal(size=(n, m))))


class TestSolveWeighting:
    def test_single_point(self):
        wt = solve_weighting(similarity(DistanceMatrix(np.zeros((1, 1))), 1.0))
        assert wt.w.tolist() == [1.0] and wt.magnitude == 1.0 and wt.all_positive

    def test_two_point_closed_form(self):
        for dist, t in [(1.0, 0.3), (2.5, 1.7), (0.4, 5.0)]:
            d = DistanceMatrix(np.array([[0.0, dist], [dist, 0.0]]))
            wt = solve_weighting(similarity(d, t))
            q = np.exp(-t * dist)
            assert np.abs(wt.w - 1.0 / (1.0 + q)).max() < 1e-12
            assert wt.magnitude == pytest.approx(2.0 / (1.0 + q), rel=1e-12)

    @pytest.mark.parametrize("delta", [1e-3, 0.5, 1.5])
    @pytest.mark.parametrize("t", [0.01, 1.0, 10.0])
    def test_isoceles_closed_form(self, delta, t):
        wt = solve_weighting(similarity(isoceles_distance(delta), t))
        w1, w23 = example1_closed_form(delta, t)
        assert abs(wt.w[0] - w1) < 1e-8 * abs(w1)
        assert abs(wt.w[1] - w23) < 1e-8 * abs(w23)
        assert abs(wt.w[2] - w23) < 1e-8 * abs(w23)

    def test_residual_invariant_random(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            d = random_set(rng, n_max=40)
            t = float(rng.uniform(0.05, 5.0))
            Z = similarity(d, t)
            wt = solve_weighting(Z)
            assert np.abs(Z.Z @ wt.w - 1.0).max() <= 1e-8 * d.n

    def test_magnitude_is_component_sum(self):
        rng = np.random.default_rng(1)
        d = random_set(rng)
        wt = solve_weighting(similarity(d, 1.0))
        assert wt.magnitude == wt.w.sum()

    def test_coweighting_matches_weighting(self):
        rng = np.random.default_rng(2)
        d = random_set(rng)
        Z = similarity(d, 0.7)
        wt = solve_weighting(Z)
        co = solve_coweighting(Z)
        assert np.abs(wt.w - co.w).max() < 1e-8
        assert abs(wt.magnitude - co.magnitude) < 1e-8

    def test_large_scale_limit_all_ones(self):
        d = line_distance()
        t = 40.0 / d.min_offdiag()
        wt = solve_weighting(similarity(d, t))
        assert np.abs(wt.w - 1.0).max() <= 1e-10

    def test_coincident_points_rejected(self):
        d = DistanceMatrix(np.array([[0, 0, 1], [0, 0, 1], [1, 1, 0]], dtype=float))
        with pytest.raises(IllConditionedError) as err:
            solve_weighting(similarity(d, 1.0))
        assert err.value.condition > 1e12 or not np.isfinite(err.value.condition)


class TestMagnitude:
    def test_effective_number_of_points_plateaus(self):
        d = isoceles_distance(1e-3)
        for t, expect in [(1e-2, 1.0), (10.0, 2.0), (1e4, 3.0)]:
            assert abs(magnitude_of(similarity(d, t)) - expect) < 0.1

    def test_two_points_at_log3(self):
        d = DistanceMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert magnitude_of(similarity(d, np.log(3.0))) == pytest.approx(1.5, rel=1e-12)


class TestMagnitudeProfile:
    def test_two_point_closed_form(self):
        d = DistanceMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
        prof = magnitude_profile(d, 0.01, 20.0, 40)
        want = 2.0 / (1.0 + np.exp(-prof.ts))
        assert np.abs(prof.magnitudes - want).max() < 1e-8

    def test_limit_counts_points(self):
        rng = np.random.default_rng(3)
        d = distance_matrix(PointSet(rng.normal(size=(5, 2))))
        prof = magnitude_profile(d, 0.1, 80.0 / d.min_offdiag(), 32)
        assert abs(prof.magnitudes[-1] - 5.0) < 0.05

    def test_isoceles_passes_near_plateaus(self):
        prof = magnitude_profile(isoceles_distance(1e-3), 1e-3, 1e5, 96)
        for plateau in (1.0, 2.0, 3.0):
            assert np.abs(prof.magnitudes - plateau).min() < 0.1

    def test_solver_failures_become_gaps(self):
        d = DistanceMatrix(np.array([[0, 0, 1], [0, 0, 1], [1, 1, 0]], dtype=float))
        prof = magnitude_profile(d, 0.1, 10.0, 8)
        assert len(prof.gaps) == 8 and prof.ts.size == 0

    def test_grid_validation(self):
        d = line_distance()
        with pytest.raises(ValueError):
            magnitude_profile(d, 1.0, 0.5, 8)
        with pytest.raises(ValueError):
            magnitude_profile(d, 0.1, 1.0, 1)

    def test_default_grid_spans_both_cutoffs(self):
        d = square_plus_center()
        rep = positive_cutoff(d)
        prof = magnitude_profile(d)
        assert prof.ts.size == 64
        assert prof.ts[0] == pytest.approx(rep.t_plus / 10.0, rel=1e-6)
        assert prof.ts[-1] == pytest.approx(10.0 * rep.t_d, rel=1e-6)


class TestDiagonalCutoff:
    def test_two_points(self):
        d = DistanceMatrix(np.array([[0.0, 3.0], [3.0, 0.0]]))
        rep = diagonal_cutoff(d)
        assert rep.t_d == 0.0 and rep.lower_bound == 0.0 and rep.upper_bound == 0.0

    def test_three_equidistant(self):
        d = DistanceMatrix(np.ones((3, 3)) - np.eye(3))
        rep = diagonal_cutoff(d)
        assert rep.t_d == pytest.approx(np.log(2.0), abs=1e-9)
        assert rep.lower_bound == pytest.approx(np.log(2.0))
        assert rep.upper_bound == pytest.approx(np.log(2.0))

    def test_line_golden_ratio(self):
        rep = diagonal_cutoff(line_distance(), tol=1e-9)
        assert rep.t_d == pytest.approx(GOLDEN_LINE_TD, abs=1e-7)
        assert rep.lower_bound <= rep.t_d <= rep.upper_bound

    def test_bracket_on_random_sets(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            d = random_set(rng, n_max=30)
            rep = diagonal_cutoff(d)
            assert rep.lower_bound - 1e-9 <= rep.t_d <= rep.upper_bound + 1e-9

    def test_zero_offdiagonal_is_error(self):
        d = DistanceMatrix(np.array([[0, 0, 1], [0, 0, 1], [1, 1, 0]], dtype=float))
        with pytest.raises(ScaleSearchError):
            diagonal_cutoff(d)


class TestPositiveCutoff:
    def test_two_points_zero(self):
        d = DistanceMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
        rep = positive_cutoff(d)
        assert rep.t_plus == 0.0

    def test_square_plus_center_against_dense_scan(self):
        d = square_plus_center()
        rep = positive_cutoff(d)
        grid = np.geomspace(rep.t_d * 1e-3, rep.t_d, 10_000)
        positive = []
        for t in grid:
            try:
                positive.append(solve_weighting(similarity(d, t)).all_positive)
            except MagflowError:
                positive.append(False)
        positive = np.asarray(positive)
        bad = np.nonzero(~positive)[0]
        oracle = grid[bad[-1] + 1] if bad.size else grid[0]
        assert rep.t_plus > 0
        assert abs(oracle - rep.t_plus) <= 1e-3 * rep.t_plus + (grid[1] - grid[0])

    def test_ordering_on_random_clouds(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            d = distance_matrix(PointSet(rng.normal(size=(20, 2))))
            rep = positive_cutoff(d)
            assert rep.t_plus <= rep.t_d * (1 + 1e-9)

    def test_weighting_positive_above_cutoff(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            d = random_set(rng)
            rep = positive_cutoff(d)
            t = max(rep.t_plus * 1.05, rep.t_plus + 1e-9, 1e-9)
            assert solve_weighting(similarity(d, t)).all_positive


class TestZeroScale:
    def test_sums_to_one(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            w0 = zero_scale_weighting(random_set(rng))
            assert abs(w0.sum() - 1.0) < 1e-10

    def test_two_points_half_half(self):
        d = DistanceMatrix(np.array([[0.0, 2.0], [2.0, 0.0]]))
        w0 = zero_scale_weighting(d)
        assert np.abs(w0 - 0.5).max() < 1e-12
        wt = solve_weighting(similarity(d, 1e-6))
        assert np.abs(w0 - wt.w).max() < 1e-4

    def test_line_matches_small_scale_solve(self):
        d = line_distance()
        w0 = zero_scale_weighting(d)
        wt = solve_weighting(similarity(d, 1e-6))
        assert np.abs(w0 - wt.w).max() < 1e-3

    def test_singular_distance_matrix(self):
        d = DistanceMatrix(np.array([[0, 0, 1], [0, 0, 1], [1, 1, 0]], dtype=float))
        with pytest.raises(IllConditionedError):
            zero_scale_weighting(d)


class TestDiversity:
    def test_identity_similarity_recovers_renyi_of_uniform(self):
        n = 6
        d = DistanceMatrix((np.ones((n, n)) - np.eye(n)) * 1.0)
        Z = similarity(d, 1e6)  # effectively the identity matrix
        p = np.full(n, 1.0 / n)
        for q in (0.0, 0.5, 1.0, 2.0, 5.0, np.inf):
            assert diversity_order_q(Z, p, q) == pytest.approx(n, rel=1e-9)

    def test_normalized_weighting_is_q_independent_maximum(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            d = random_set(rng, n_max=12)
            rep = positive_cutoff(d)
            t = max(rep.t_plus * 1.05, 1e-9)
            Z = similarity(d, t)
            wt = solve_weighting(Z)
            p = wt.distribution()
            for q in (0.0, 0.5, 1.0, 2.0, 5.0, np.inf):
                assert diversity_order_q(Z, p, q) == pytest.approx(wt.magnitude, rel=1e-6)

    def test_simplex_grid_maximum_at_weighting(self):
        d = isoceles_distance(0.8)
        t = 0.9  # the isoceles weighting is positive at every scale
        Z = similarity(d, t)
        wt = solve_weighting(Z)
        # brute-force order-2 diversity over the probability simplex, step 0.001
        step = 0.001
        p1 = np.arange(0.0, 1.0 + step / 2, step)
        P1, P2 = np.meshgrid(p1, p1, indexing="ij")
        mask = P1 + P2 <= 1.0 + 1e-12
        P = np.column_stack([P1[mask], P2[mask], 1.0 - P1[mask] - P2[mask]])
        P[np.abs(P) < 1e-12] = 0.0
        ZP = P @ Z.Z.T
        vals = np.where(P > 0, P * ZP, 0.0).sum(axis=1)  # sum p_j (Zp)_j
        best = P[np.argmin(vals)]  # order 2: diversity = 1 / sum p_j (Zp)_j
        assert np.abs(best - wt.distribution()).max() <= 2 * step
        best_div = 1.0 / vals.min()
        assert best_div <= wt.magnitude * (1.0 + 1e-6)

    def test_invalid_inputs(self):
        d = line_distance()
        Z = similarity(d, 1.0)
        with pytest.raises(ValueError):
            diversity_order_q(Z, np.array([0.5, 0.5, 0.5]), 2.0)
        with pytest.raises(ValueError):
            diversity_order_q(Z, np.array([0.4, 0.3, 0.3]), -1.0)
        with pytest.raises(ValueError):
            diversity_order_q(Z, np.array([0.0, 0.0, 0.0]), 2.0)

    def test_maximum_diversity_distribution(self):
        d = square_plus_center()
        rep = positive_cutoff(d)
        dist = maximum_diversity_distribution(d, rep.t_plus * 1.1)
        assert abs(dist.p.sum() - 1.0) < 1e-10
        assert set(dist.q_checked) == {0.0, 1.0, 2.0, np.inf}


class TestSpread:
    def test_single_point(self):
        E0, a = spread(DistanceMatrix(np.zeros((1, 1))), 1.0)
        assert E0 == 1.0 and a.tolist() == [1.0]

    def test_two_points(self):
        dist = 2.0
        d = DistanceMatrix(np.array([[0.0, dist], [dist, 0.0]]))
        E0, a = spread(d, 1.0)
        assert E0 == pytest.approx(2.0 / (1.0 + np.exp(-dist)), rel=1e-12)

    def test_bounded_by_magnitude_above_cutoff(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            d = random_set(rng)
            rep = positive_cutoff(d)
            t = max(rep.t_plus * 1.05, 1e-6)
            E0, _ = spread(d, t)
            assert E0 <= magnitude_of(similarity(d, t)) + 1e-9

    def test_range_monotonicity_and_exponential_bound(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            d = random_set(rng, n_max=25, n_min=2)
            ts = np.geomspace(1e-3, 50.0, 64)
            E = np.array([spread(d, t)[0] for t in ts])
            assert np.all(E >= 1.0 - 1e-9) and np.all(E <= d.n + 1e-9)
            assert np.all(np.diff(E) >= -1e-9)
            assert np.all(E <= np.exp(ts * d.max_offdiag()) + 1e-9)


class TestErosion:
    def test_already_positive_unchanged(self):
        d = line_distance()
        rep = positive_cutoff(d)
        t = max(rep.t_plus * 1.2, 1e-3)
        idx, wt = erode(d, t)
        assert idx.tolist() == [0, 1, 2] and wt.all_positive

    def test_center_of_square_eroded(self):
        d = square_plus_center()
        rep = positive_cutoff(d)
        idx, wt = erode(d, rep.t_plus / 2.0)
        assert 4 not in idx.tolist()
        assert wt.all_positive

    def test_eroded_weighting_maximizes_diversity(self):
        d = square_plus_center()
        rep = positive_cutoff(d)
        t = rep.t_plus / 2.0
        idx, wt = erode(d, t)
        sub = DistanceMatrix(d.d[np.ix_(idx, idx)])
        Z = similarity(sub, t)
        p = wt.distribution()
        for q in (0.0, 1.0, 2.0, np.inf):
            assert diversity_order_q(Z, p, q) == pytest.approx(wt.magnitude, rel=1e-6)

    def test_terminates_on_random_sets(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            d = random_set(rng)
            rep = positive_cutoff(d)
            for t in (rep.t_plus / 4.0, rep.t_plus, rep.t_d):
                if t <= 0:
                    continue
                idx, wt = erode(d, t)
                assert len(idx) >= 1 and wt.all_positive
