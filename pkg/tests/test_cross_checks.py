"""Cross-checks against reference implementations (test-side oracles)."""

import numpy as np
import pytest
import statsmodels.api as sm
from scipy import stats
from statsmodels.stats.diagnostic import het_arch

from eventlab.regression import DesignMatrix, arch_lm_test, jarque_bera, ols, t_stats, wald_test


@pytest.fixture
def problem(rng):
    n = 120
    x1 = rng.normal(size=n)
    x2 = rng.normal(size=n)
    y = 0.3 + 1.2 * x1 - 0.7 * x2 + rng.normal(scale=0.8, size=n)
    X = DesignMatrix.from_columns({"x1": x1, "x2": x2})
    return X, y


class TestAgainstStatsmodels:
    def test_coefficients_and_standard_errors(self, problem):
        X, y = problem
        fit = ols(X, y)
        ref = sm.OLS(y, X.data).fit()
        assert fit.coefficients == pytest.approx(np.asarray(ref.params), rel=1e-10)
        assert fit.standard_errors == pytest.approx(np.asarray(ref.bse), rel=1e-10)
        assert fit.sigma2 == pytest.approx(float(ref.scale), rel=1e-10)
        assert fit.r_squared == pytest.approx(float(ref.rsquared), rel=1e-10)
        assert fit.covariance == pytest.approx(np.asarray(ref.cov_params()), rel=1e-9)

    def test_t_statistics_and_p_values(self, problem):
        X, y = problem
        fit = ols(X, y)
        ref = sm.OLS(y, X.data).fit()
        ours = t_stats(fit)
        assert [t.statistic for t in ours] == pytest.approx(
            np.asarray(ref.tvalues), rel=1e-10
        )
        assert [t.p_value for t in ours] == pytest.approx(
            np.asarray(ref.pvalues), rel=1e-9, abs=1e-12
        )

    def test_robust_hc1_errors(self, problem):
        X, y = problem
        fit = ols(X, y, robust=True)
        ref = sm.OLS(y, X.data).fit(cov_type="HC1")
        assert fit.standard_errors == pytest.approx(np.asarray(ref.bse), rel=1e-9)

    def test_wald_chi2(self, problem):
        X, y = problem
        fit = ols(X, y)
        ref = sm.OLS(y, X.data).fit()
        R = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        ours = wald_test(fit, R, np.zeros(2))
        theirs = ref.wald_test(R, use_f=False, scalar=True)
        assert ours.statistic == pytest.approx(float(theirs.statistic), rel=1e-9)
        assert ours.p_value == pytest.approx(float(theirs.pvalue), rel=1e-8, abs=1e-12)

    def test_arch_lm(self, rng):
        e = rng.normal(size=300) * np.repeat([1.0, 2.0], 150)
        ours = arch_lm_test(e, lags=4)
        lm_stat, lm_p, _, _ = het_arch(e, nlags=4)
        assert ours.statistic == pytest.approx(float(lm_stat), rel=1e-9)
        assert ours.p_value == pytest.approx(float(lm_p), rel=1e-9, abs=1e-12)

    def test_jarque_bera(self, rng):
        e = rng.exponential(size=400)
        ours = jarque_bera(e)
        ref_stat, ref_p = stats.jarque_bera(e)
        assert ours.statistic == pytest.approx(float(ref_stat), rel=1e-10)
        assert ours.p_value == pytest.approx(float(ref_p), rel=1e-9, abs=1e-15)
