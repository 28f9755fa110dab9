import math

import numpy as np
import pytest
import statsmodels.api as sm
from scipy import stats

from dpbayes.experiments import gen_regression
from dpbayes.statistics import (
    DegenerateSampleError,
    batch_chi2,
    batch_f,
    batch_t,
    batch_z,
    chi2_statistic,
    f_statistic,
    t_statistic,
    z_statistic,
)


class TestHandFixtures:
    def test_chi2_balanced_table(self):
        obs = chi2_statistic([[30, 20], [20, 30]])
        assert obs.value == pytest.approx(4.0, abs=1e-12)
        assert obs.dof1 == 1.0

    def test_t_symmetric_pair(self):
        obs = t_statistic([-1.0, 1.0])
        assert obs.value == 0.0 and obs.dof1 == 1.0

    def test_t_small_sample(self):
        x = np.array([0.3, 1.2, 0.8, 0.5])
        s = math.sqrt(((x - 0.7) ** 2).sum() / 3)
        assert t_statistic(x).value == pytest.approx(2 * 0.7 / s, abs=1e-12)

    def test_f_constant_response(self):
        X = np.random.default_rng(0).normal(size=(20, 2))
        obs = f_statistic(X, np.full(20, 3.0))
        assert obs.value == 0.0
        assert (obs.dof1, obs.dof2) == (2.0, 17.0)

    def test_z(self):
        assert z_statistic([1.0, 2.0, 3.0, 4.0], sigma=2.0).value == pytest.approx(2.5)


class TestDegenerate:
    def test_constant_sample(self):
        with pytest.raises(DegenerateSampleError):
            t_statistic([1.0, 1.0, 1.0])

    def test_single_observation(self):
        with pytest.raises(DegenerateSampleError):
            t_statistic([1.0])

    def test_zero_margin(self):
        with pytest.raises(DegenerateSampleError):
            chi2_statistic([[10, 0], [5, 0]])

    def test_collinear_design(self):
        x = np.random.default_rng(1).normal(size=30)
        with pytest.raises(DegenerateSampleError):
            f_statistic(np.column_stack([x, x]), x + 1.0)

    def test_too_few_rows(self):
        with pytest.raises(DegenerateSampleError):
            f_statistic(np.eye(3), np.arange(3.0))

    def test_negative_count(self):
        with pytest.raises(ValueError):
            chi2_statistic([[1, -1], [2, 3]])


class TestAgainstReferences:
    @pytest.mark.parametrize("seed", range(5))
    def test_t_matches_scipy(self, seed):
        x = np.random.default_rng(seed).normal(0.3, 2.0, size=37)
        assert t_statistic(x).value == pytest.approx(stats.ttest_1samp(x, 0.0).statistic, rel=1e-12)

    @pytest.mark.parametrize("table", [[[12, 7], [3, 19]], [[100, 80], [90, 110]], [[1, 2], [3, 4]]])
    def test_chi2_matches_scipy(self, table):
        ref = stats.chi2_contingency(np.array(table), correction=False)[0]
        assert chi2_statistic(table).value == pytest.approx(ref, rel=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_f_matches_statsmodels(self, seed):
        X, y = gen_regression(60, 3, 1.0, [0.1, -0.05, 0.0], 1.0, seed)
        ref = sm.OLS(y, sm.add_constant(X)).fit().fvalue
        obs = f_statistic(X, y)
        assert obs.value == pytest.approx(ref, rel=1e-10)
        assert (obs.dof1, obs.dof2) == (3.0, 56.0)


class TestBatch:
    sizes = np.array([7, 6, 6])

    def test_t(self):
        x = np.random.default_rng(2).normal(size=(4, 19))
        got = batch_t(x, self.sizes)
        starts = np.r_[0, np.cumsum(self.sizes)[:-1]]
        for r in range(4):
            for j, (s, m) in enumerate(zip(starts, self.sizes)):
                assert got[r, j] == pytest.approx(t_statistic(x[r, s : s + m]).value, rel=1e-12)

    def test_t_degenerate_block_is_nan(self):
        x = np.random.default_rng(3).normal(size=(1, 19))
        x[0, 7:13] = 2.0
        got = batch_t(x, self.sizes)
        assert np.isnan(got[0, 1]) and np.isfinite(got[0, [0, 2]]).all()

    def test_z(self):
        x = np.random.default_rng(4).normal(size=(3, 19))
        got = batch_z(x, self.sizes, 2.0)
        assert got[1, 2] == pytest.approx(z_statistic(x[1, 13:], 2.0).value, rel=1e-12)

    def test_chi2(self):
        cells = np.random.default_rng(5).integers(0, 4, size=(3, 40))
        sizes = np.array([20, 20])
        got = batch_chi2(cells, sizes)
        for r in range(3):
            for j in range(2):
                block = cells[r, 20 * j : 20 * (j + 1)]
                counts = np.bincount(block, minlength=4)
                assert got[r, j] == pytest.approx(chi2_statistic(counts).value, rel=1e-12)

    def test_chi2_empty_margin_is_nan(self):
        cells = np.array([[0, 0, 1, 1, 0, 1, 2, 3]])
        got = batch_chi2(cells, np.array([4, 4]))
        assert np.isnan(got[0, 0]) and np.isfinite(got[0, 1])

    def test_f(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(3, 30, 2))
        y = X @ np.array([0.4, -0.2]) + rng.normal(size=(3, 30))
        sizes = np.array([10, 10, 10])
        got = batch_f(X, y, sizes)
        for r in range(3):
            for j in range(3):
                sl = slice(10 * j, 10 * (j + 1))
                assert got[r, j] == pytest.approx(f_statistic(X[r, sl], y[r, sl]).value, rel=1e-9)

    def test_f_collinear_block_is_nan(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(1, 20, 2))
        X[0, :10, 1] = 2 * X[0, :10, 0]
        got = batch_f(X, rng.normal(size=(1, 20)), np.array([10, 10]))
        assert np.isnan(got[0, 0]) and np.isfinite(got[0, 1])


class TestNullDistribution:
    def test_t_is_pivotal(self):
        rng = np.random.default_rng(8)
        a = batch_t(rng.normal(0, 1.0, size=(10_000, 15)), [15])[:, 0]
        b = batch_t(rng.normal(0, 25.0, size=(10_000, 15)), [15])[:, 0]
        assert stats.ks_2samp(a, b).pvalue > 0.01
        assert stats.kstest(a, stats.t(14).cdf).pvalue > 0.001

    def test_f_is_pivotal(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(10_000, 20, 2))
        a = batch_f(X, rng.normal(0, 0.1, size=(10_000, 20)), [20])[:, 0]
        b = batch_f(X, rng.normal(0, 10.0, size=(10_000, 20)), [20])[:, 0]
        assert stats.ks_2samp(a, b).pvalue > 0.01
        assert stats.kstest(a, stats.f(2, 17).cdf).pvalue > 0.001

    def test_chi2_null_mean(self):
        cells = np.random.default_rng(10).integers(0, 4, size=(10_000, 200))
        h = batch_chi2(cells, [200])[:, 0]
        assert abs(h.mean() - 1.0) < 0.1
