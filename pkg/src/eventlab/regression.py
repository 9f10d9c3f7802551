"""Ordinary least squares engine and residual diagnostic tests.

The solver uses a QR decomposition rather than normal-equations inversion,
with an SVD-based rank guard (relative singular-value cutoff 1e-10).
Classical homoskedastic standard errors are the default; White (HC1)
errors are available behind a flag.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

RANK_RTOL = 1e-10


class EstimationError(ValueError):
    """The regression problem is ill-posed (rank deficiency, bad shapes)."""


@dataclass(frozen=True)
class DesignMatrix:
    """Named regressor columns, optionally led by an intercept."""

    names: tuple[str, ...]
    data: np.ndarray
    includes_intercept: bool

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=float)
        if arr.ndim != 2:
            raise EstimationError("design matrix must be two-dimensional")
        if arr.shape[1] != len(self.names):
            raise EstimationError("column names do not match the matrix width")
        if len(set(self.names)) != len(self.names):
            raise EstimationError(f"duplicate column names: {self.names}")
        if arr.shape[0] <= arr.shape[1]:
            raise EstimationError(
                f"need more rows ({arr.shape[0]}) than columns ({arr.shape[1]})"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_columns(
        cls, columns: Mapping[str, np.ndarray], intercept: bool = True
    ) -> "DesignMatrix":
        names = list(columns)
        arrays = [np.asarray(columns[n], dtype=float) for n in names]
        if intercept:
            n = len(arrays[0]) if arrays else 0
            arrays.insert(0, np.ones(n))
            names.insert(0, "const")
        return cls(tuple(names), np.column_stack(arrays), intercept)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    def take_rows(self, indices) -> "DesignMatrix":
        return DesignMatrix(self.names, self.data[np.asarray(indices)], self.includes_intercept)


@dataclass(frozen=True)
class RegressionFit:
    """OLS result: named coefficients, inference pieces, and residuals."""

    names: tuple[str, ...]
    coefficients: np.ndarray
    standard_errors: np.ndarray
    residuals: np.ndarray
    sigma2: float
    dof: int
    covariance: np.ndarray
    r_squared: float

    @property
    def n(self) -> int:
        return len(self.residuals)

    def coefficient(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    def std_error(self, name: str) -> float:
        return float(self.standard_errors[self.names.index(name)])


@dataclass(frozen=True)
class TestStat:
    """A named test statistic with its p-value and degrees of freedom."""

    name: str
    statistic: float
    p_value: float
    dof: float | tuple[int, int]
    degenerate: bool = False


def _rank_check(X: np.ndarray, names: Sequence[str]) -> None:
    # equilibrate columns so the cutoff measures collinearity, not scale
    norms = np.linalg.norm(X, axis=0)
    dead = np.nonzero(norms == 0.0)[0]
    if dead.size:
        raise EstimationError(
            f"design matrix is rank deficient (column {names[int(dead[0])]!r})"
        )
    scaled = X / norms
    singular = np.linalg.svd(scaled, compute_uv=False)
    if singular[-1] < RANK_RTOL * singular[0]:
        # name the column most aligned with the null direction
        _, _, vt = np.linalg.svd(scaled)
        culprit = names[int(np.argmax(np.abs(vt[-1])))]
        raise EstimationError(f"design matrix is rank deficient (column {culprit!r})")


def ols(X: DesignMatrix, y: np.ndarray, robust: bool = False) -> RegressionFit:
    """Fit ``y`` on the design by least squares.

    Parameters
    ----------
    X : DesignMatrix
        Full-column-rank design; rank deficiency (smallest singular value
        below 1e-10 of the largest) raises naming the offending column.
    y : array
        Dependent vector, one value per design row.
    robust : bool
        Use HC1 heteroskedasticity-robust standard errors instead of the
        classical ``sigma2 * (X'X)^-1`` covariance.

    Returns
    -------
    RegressionFit
        ``sigma2`` is SSR/(n-k); ``r_squared`` is centered when the design
        includes an intercept, uncentered otherwise.
    """
    y = np.asarray(y, dtype=float)
    A = X.data
    n, k = A.shape
    if len(y) != n:
        raise EstimationError(f"y has {len(y)} rows but the design has {n}")
    _rank_check(A, X.names)

    q, r = np.linalg.qr(A)
    beta = np.linalg.solve(r, q.T @ y)
    residuals = y - A @ beta
    ssr = float(residuals @ residuals)
    dof = n - k
    sigma2 = ssr / dof
    r_inv = np.linalg.solve(r, np.eye(k))
    xtx_inv = r_inv @ r_inv.T

    if robust:
        meat = A.T @ (A * (residuals**2)[:, None])
        covariance = xtx_inv @ meat @ xtx_inv * (n / dof)
    else:
        covariance = sigma2 * xtx_inv
    covariance = (covariance + covariance.T) / 2.0

    if X.includes_intercept:
        tss = float(np.sum((y - y.mean()) ** 2))
    else:
        tss = float(y @ y)
    if tss > 0.0:
        r_squared = 1.0 - ssr / tss
    else:
        r_squared = 1.0 if ssr <= 0.0 else 0.0

    return RegressionFit(
        names=X.names,
        coefficients=beta,
        standard_errors=np.sqrt(np.diag(covariance)),
        residuals=residuals,
        sigma2=sigma2,
        dof=dof,
        covariance=covariance,
        r_squared=r_squared,
    )


def t_stats(fit: RegressionFit) -> list[TestStat]:
    """Per-coefficient t statistics with two-sided Student-t p-values."""
    if fit.dof < 1:
        raise EstimationError("t statistics need at least 1 residual degree of freedom")
    out = []
    for name, coef, se in zip(fit.names, fit.coefficients, fit.standard_errors):
        if se == 0.0:
            if coef == 0.0:
                out.append(TestStat(name, 0.0, 1.0, fit.dof, degenerate=True))
            else:
                # largest finite value keeps the TestStat finiteness contract
                huge = float(np.copysign(np.finfo(float).max, coef))
                out.append(TestStat(name, huge, 0.0, fit.dof, degenerate=True))
            continue
        stat = float(coef / se)
        p = 2.0 * float(stats.t.sf(abs(stat), fit.dof))
        out.append(TestStat(name, stat, p, fit.dof))
    return out


def chow_test(X: DesignMatrix, y: np.ndarray, break_index: int) -> TestStat:
    """F test for a structural break splitting the sample at ``break_index``.

    ``F = ((SSR_pooled - SSR_1 - SSR_2)/k) / ((SSR_1 + SSR_2)/(n - 2k))``
    with the second sub-sample starting at ``break_index``.
    """
    y = np.asarray(y, dtype=float)
    n, k = X.data.shape
    if break_index <= k or n - break_index <= k:
        raise EstimationError(
            f"both sub-samples need more than {k} rows; "
            f"break at {break_index} leaves {break_index} and {n - break_index}"
        )
    ssr_pooled = _ssr(X.data, y)
    ssr_1 = _ssr(X.data[:break_index], y[:break_index])
    ssr_2 = _ssr(X.data[break_index:], y[break_index:])
    dof = (k, n - 2 * k)
    # a pooled fit at float-noise level leaves nothing for a break to explain
    if ssr_pooled <= 1e-20 * max(float(y @ y), 1e-300):
        return TestStat("chow", 0.0, 1.0, dof)
    num = max(ssr_pooled - ssr_1 - ssr_2, 0.0) / k
    den = (ssr_1 + ssr_2) / (n - 2 * k)
    if den == 0.0:
        statistic = float(np.finfo(float).max)
    else:
        statistic = num / den
        if not np.isfinite(statistic):
            statistic = float(np.finfo(float).max)
    p = float(stats.f.sf(statistic, *dof))
    return TestStat("chow", statistic, p, dof)


def _ssr(A: np.ndarray, y: np.ndarray) -> float:
    beta, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ beta
    return float(resid @ resid)


def wald_test(fit: RegressionFit, restriction: np.ndarray, value: np.ndarray) -> TestStat:
    """Wald test of ``R beta = q`` using the fit's covariance matrix."""
    R = np.atleast_2d(np.asarray(restriction, dtype=float))
    q = np.atleast_1d(np.asarray(value, dtype=float))
    r, k = R.shape
    if k != len(fit.coefficients):
        raise EstimationError(f"restriction has {k} columns for {len(fit.coefficients)} coefficients")
    if q.shape != (r,):
        raise EstimationError("restriction value length does not match the number of rows")
    if np.linalg.matrix_rank(R) < r:
        raise EstimationError("restriction matrix does not have full row rank")
    diff = R @ fit.coefficients - q
    middle = R @ fit.covariance @ R.T
    try:
        solved = np.linalg.solve(middle, diff)
    except np.linalg.LinAlgError:
        raise EstimationError("R Cov R' is singular; the restriction is not testable") from None
    statistic = float(diff @ solved)
    statistic = max(statistic, 0.0)
    p = float(stats.chi2.sf(statistic, r))
    return TestStat("wald", statistic, p, r)


def arch_lm_test(residuals: np.ndarray, lags: int) -> TestStat:
    """Engle LM test: squared residuals on their own lags, ``n * R^2``."""
    e = np.asarray(residuals, dtype=float)
    if lags < 1:
        raise EstimationError("lags must be positive")
    if len(e) <= lags + 1:
        raise EstimationError(f"need more than {lags + 1} residuals for {lags} lags")
    e2 = e**2
    if np.allclose(e2, e2[0]):
        return TestStat("arch_lm", 0.0, 1.0, lags, degenerate=True)
    y = e2[lags:]
    lagged = {f"lag{j}": e2[lags - j : len(e2) - j] for j in range(1, lags + 1)}
    fit = ols(DesignMatrix.from_columns(lagged), y)
    statistic = len(y) * max(fit.r_squared, 0.0)
    p = float(stats.chi2.sf(statistic, lags))
    return TestStat("arch_lm", statistic, p, lags)


def jarque_bera(residuals: np.ndarray) -> TestStat:
    """Jarque-Bera normality test from sample skewness and kurtosis."""
    e = np.asarray(residuals, dtype=float)
    n = len(e)
    if n < 8:
        raise EstimationError("Jarque-Bera needs at least 8 observations")
    centered = e - e.mean()
    m2 = float(np.mean(centered**2))
    if m2 == 0.0:
        return TestStat("jarque_bera", 0.0, 1.0, 2, degenerate=True)
    skew = float(np.mean(centered**3)) / m2**1.5
    kurt = float(np.mean(centered**4)) / m2**2
    statistic = n / 6.0 * (skew**2 + (kurt - 3.0) ** 2 / 4.0)
    p = float(stats.chi2.sf(statistic, 2))
    return TestStat("jarque_bera", statistic, p, 2)
