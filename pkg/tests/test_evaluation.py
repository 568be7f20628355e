"""Evaluation metrics: transport distance, depth errors, summary statistics."""
import numpy as np
import pytest

from besi.evaluation import (
    MassDistribution,
    depth_error_bins,
    depth_of_max,
    depth_regression,
    emd,
    emd_single_truth,
    summarize,
)
from besi.exceptions import DegenerateDataError
from besi.model import SourceEstimate, SourceSpace


def _dist(positions, masses):
    return MassDistribution(
        positions=np.asarray(positions, dtype=float),
        masses=np.asarray(masses, dtype=float),
    )


def _random_dist(rng, n):
    return _dist(rng.uniform(-50, 50, (n, 3)), rng.uniform(0.1, 1.0, n))


def _space(positions, depths=None, d=1):
    positions = np.asarray(positions, dtype=float)
    n = positions.shape[0]
    if depths is None:
        depths = np.zeros(n)
    basis = np.zeros((n, d, 3))
    basis[:, 0, :] = [0.0, 0.0, 1.0]
    if d > 1:
        basis[:, 1, :] = [1.0, 0.0, 0.0]
    return SourceSpace(
        positions=positions, depths=np.asarray(depths, dtype=float),
        orientation_basis=basis,
    )


class TestEmd:
    def test_identical_distributions(self):
        a = _dist([[0, 0, 0], [1, 2, 3]], [0.5, 0.5])
        assert emd(a, a) == pytest.approx(0.0, abs=1e-12)

    def test_two_atoms_five_mm_apart(self):
        a = _dist([[0, 0, 0]], [1.0])
        b = _dist([[5, 0, 0]], [1.0])
        assert emd(a, b) == pytest.approx(5.0, abs=1e-9)

    def test_split_mass(self):
        # 0.25 of the mass travels 2 mm, 0.75 travels 4 mm: 3.5 mm
        a = _dist([[0, 0, 0]], [1.0])
        b = _dist([[2, 0, 0], [0, 4, 0]], [0.25, 0.75])
        assert emd(a, b) == pytest.approx(3.5, abs=1e-9)

    def test_symmetry(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            a, b = _random_dist(rng, 6), _random_dist(rng, 4)
            assert emd(a, b) == pytest.approx(emd(b, a), abs=1e-9)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            a, b, c = (_random_dist(rng, int(rng.integers(1, 6))) for _ in range(3))
            assert emd(a, c) <= emd(a, b) + emd(b, c) + 1e-9

    def test_identity_of_indiscernibles(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            a = _random_dist(rng, 5)
            assert emd(a, a) <= 1e-9

    def test_mass_normalization_invariance(self):
        rng = np.random.default_rng(8)
        a, b = _random_dist(rng, 5), _random_dist(rng, 5)
        scaled = _dist(b.positions, b.masses * 40.0)
        assert emd(a, scaled) == pytest.approx(emd(a, b), abs=1e-9)

    def test_single_truth_shortcut_matches_lp(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            est = _random_dist(rng, 50)
            point = rng.uniform(-50, 50, 3)
            via_lp = emd(est, _dist(point[None, :], [1.0]))
            assert emd_single_truth(est, point) == pytest.approx(via_lp, abs=1e-9)

    def test_single_truth_examples(self):
        concentrated = _dist([[1, 2, 3]], [1.0])
        assert emd_single_truth(concentrated, np.array([1.0, 2.0, 3.0])) == pytest.approx(0.0)
        # mass half at distance 1, half at distance 3 -> 2
        spread = _dist([[1, 0, 0], [3, 0, 0]], [0.5, 0.5])
        assert emd_single_truth(spread, np.zeros(3)) == pytest.approx(2.0)


class TestMassDistribution:
    def test_masses_are_normalized(self):
        a = _dist([[0, 0, 0], [1, 0, 0]], [2.0, 6.0])
        np.testing.assert_allclose(a.masses, [0.25, 0.75])

    def test_zero_mass_is_degenerate(self):
        with pytest.raises(DegenerateDataError):
            _dist([[0, 0, 0]], [0.0])

    def test_from_estimate_amplitude_mode(self):
        space = _space([[0, 0, 0], [1, 0, 0], [2, 0, 0]])
        est = SourceEstimate(coefficients=np.array([1.0, -3.0, 0.0]), d=1)
        dist = MassDistribution.from_estimate(est, space, mode="amplitude")
        np.testing.assert_allclose(dist.masses, [0.25, 0.75])
        assert dist.positions.shape == (2, 3)  # zero atom dropped

    def test_from_estimate_squared_mode(self):
        space = _space([[0, 0, 0], [1, 0, 0]])
        est = SourceEstimate(coefficients=np.array([1.0, 2.0]), d=1)
        dist = MassDistribution.from_estimate(est, space, mode="squared")
        np.testing.assert_allclose(dist.masses, [0.2, 0.8])

    def test_from_estimate_rejects_zero_and_unknown_mode(self):
        space = _space([[0, 0, 0], [1, 0, 0]])
        zero = SourceEstimate(coefficients=np.zeros(2), d=1)
        with pytest.raises(DegenerateDataError):
            MassDistribution.from_estimate(zero, space)
        est = SourceEstimate(coefficients=np.ones(2), d=1)
        with pytest.raises(ValueError):
            MassDistribution.from_estimate(est, space, mode="cubed")

    def test_block_amplitude_mass_for_d2(self):
        space = _space([[0, 0, 0], [1, 0, 0]], d=2)
        est = SourceEstimate(coefficients=np.array([3.0, 4.0, 0.0, 0.0]), d=2)
        dist = MassDistribution.from_estimate(est, space, mode="amplitude")
        np.testing.assert_allclose(dist.masses, [1.0])
        np.testing.assert_allclose(dist.positions, [[0.0, 0.0, 0.0]])


class TestDepthOfMax:
    def test_picks_depth_of_largest_amplitude(self):
        space = _space([[i, 0, 0] for i in range(4)], depths=[1.0, 2.0, 3.0, 4.0])
        est = SourceEstimate(coefficients=np.array([0.1, -5.0, 2.0, 0.0]), d=1)
        assert depth_of_max(est, space) == pytest.approx(2.0)

    def test_tie_takes_lowest_index(self):
        depths = [1.0, 2.0, 3.0, 5.0, 6.0, 7.0]
        space = _space([[i, 0, 0] for i in range(6)], depths=depths)
        coef = np.array([0.0, 0.0, 4.0, 0.0, 0.0, 4.0])
        est = SourceEstimate(coefficients=coef, d=1)
        assert depth_of_max(est, space) == pytest.approx(3.0)

    def test_zero_estimate_raises(self):
        space = _space([[0, 0, 0]], depths=[2.0])
        est = SourceEstimate(coefficients=np.zeros(1), d=1)
        with pytest.raises(DegenerateDataError):
            depth_of_max(est, space)


class TestDepthErrorBins:
    def test_documented_example(self):
        # |errors| = {0.5, 3, 12} -> one each in <=1, (1,5], (10,15]
        table = depth_error_bins([10.0, 10.0, 10.0], [10.5, 13.0, 22.0])
        assert table.labels == ("> 20", "(15, 20]", "(10, 15]", "(5, 10]", "(1, 5]", "<= 1")
        np.testing.assert_array_equal(table.counts, (0, 0, 1, 0, 1, 1))
        np.testing.assert_allclose(table.fractions, (0, 0, 1 / 3, 0, 1 / 3, 1 / 3))

    def test_fractions_sum_to_one(self):
        rng = np.random.default_rng(11)
        true = rng.uniform(0, 30, 200)
        est = true + rng.normal(0, 8, 200)
        table = depth_error_bins(true, est)
        assert sum(table.fractions) == pytest.approx(1.0, abs=1e-3)
        assert sum(table.counts) == 200

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            depth_error_bins([], [])


class TestSummarize:
    def test_documented_example(self):
        stats = summarize([1.0, 2.0, 3.0, 4.0])
        assert stats.n == 4
        assert stats.median == pytest.approx(2.5)
        assert stats.std == pytest.approx(np.sqrt(5.0 / 3.0))
        assert stats.iqr == pytest.approx(1.5)

    def test_singleton(self):
        stats = summarize([7.0])
        assert (stats.n, stats.median, stats.std, stats.iqr) == (1, 7.0, 0.0, 0.0)

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            summarize([])


class TestDepthRegression:
    def test_perfect_reconstruction(self):
        t = np.linspace(1.0, 30.0, 40)
        res = depth_regression(t, t)
        assert res.slope == pytest.approx(1.0, abs=1e-12)
        assert res.intercept == pytest.approx(0.0, abs=1e-10)
        assert res.n == 40

    def test_constant_reconstruction_has_zero_slope(self):
        t = np.linspace(1.0, 30.0, 40)
        res = depth_regression(t, np.full(40, 12.0))
        assert res.slope == pytest.approx(0.0, abs=1e-12)
        assert res.intercept == pytest.approx(12.0, abs=1e-10)

    def test_noisy_linear_relation(self):
        rng = np.random.default_rng(12)
        t = np.linspace(1.0, 30.0, 500)
        est = 0.5 * t + 2.0 + rng.normal(0.0, 0.01, 500)
        res = depth_regression(t, est)
        assert res.slope == pytest.approx(0.5, abs=0.01)
        assert res.intercept == pytest.approx(2.0, abs=0.05)
        lo, hi = res.slope_ci
        assert lo < 0.5 < hi

    def test_validation(self):
        with pytest.raises(ValueError):
            depth_regression([1.0, 2.0], [1.0, 2.0])
        with pytest.raises(ValueError):
            depth_regression([3.0, 3.0, 3.0], [1.0, 2.0, 3.0])