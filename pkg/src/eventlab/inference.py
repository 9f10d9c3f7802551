"""Event-window inference: CAR aggregation, rank test, conditional probability.

The parametric t statistics scale abnormal returns by the estimation-window
residual variance (times window length for CARs) under an independence
assumption. The rank test compares the event day's rank among abnormal
returns over estimation plus widest event window against its permutation
distribution. The conditional-probability test asks how often the
estimation history produced a rolling window move at least as extreme as
the observed event CAR; its construction is a reconstruction of a method
the source literature leaves unspecified, with a configurable reference
rate (default 5%).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .data import AlignedPanel, DataError
from .models import ArSeries, NormalReturnModel, _predict, abnormal_returns
from .regression import TestStat
from .windows import WindowLayout


@dataclass(frozen=True)
class CarResult:
    """Cumulative abnormal return over ``[-w, +w]`` with its t test."""

    sector_id: str
    half_width: int
    car: float
    t_stat: float
    p_value: float
    degenerate: bool = False


@dataclass(frozen=True)
class RankTestResult:
    """Rank statistic of the event-day abnormal return (midranks on ties)."""

    sector_id: str
    statistic: float
    p_value: float
    ranks: np.ndarray
    degenerate: bool = False


@dataclass(frozen=True)
class ConditionalProbResult:
    """Empirical exceedance probability of the event CAR in history."""

    sector_id: str
    cp: float
    t_stat: float
    p_value: float
    n_windows: int
    reference_rate: float


def car_curve(ar: ArSeries, half_width: int) -> tuple[tuple[int, ...], np.ndarray]:
    """Running sum of abnormal returns from ``-w`` through each relative day.

    The last running value is the CAR for that window; :func:`car` reuses
    it so curve endpoints and table entries are the same float.
    """
    w = half_width
    offsets = tuple(range(-w, w + 1))
    if offsets[0] not in ar.offsets or offsets[-1] not in ar.offsets:
        raise DataError(
            f"{ar.sector_id}: abnormal returns cover {ar.offsets[0]}..{ar.offsets[-1]}, "
            f"not the requested [-{w}, +{w}] window"
        )
    lo = ar.offsets.index(offsets[0])
    running = np.cumsum(ar.values[lo : lo + 2 * w + 1])
    return offsets, running


def car(ar: ArSeries, half_width: int) -> CarResult:
    """CAR over ``[-w, +w]`` with a Student-t test.

    ``t = CAR / sqrt((2w+1) * sigma2)`` where ``sigma2`` is the
    estimation-window residual variance of the normal-return model.
    """
    _, running = car_curve(ar, half_width)
    total = float(running[-1])
    scale = (2 * half_width + 1) * ar.sigma2_estimation
    if scale <= 0.0:
        return CarResult(ar.sector_id, half_width, total, 0.0, 1.0, degenerate=True)
    t = total / math.sqrt(scale)
    p = 2.0 * float(stats.t.sf(abs(t), ar.dof))
    return CarResult(ar.sector_id, half_width, total, t, p)


def ar_t_test(ar_value: float, sigma2_estimation: float, dof: int, name: str = "ar") -> TestStat:
    """t test of one abnormal return against the estimation variance."""
    if sigma2_estimation < 0.0:
        raise DataError("negative variance")
    if sigma2_estimation == 0.0:
        return TestStat(name, 0.0, 1.0, dof, degenerate=True)
    statistic = ar_value / math.sqrt(sigma2_estimation)
    p = 2.0 * float(stats.t.sf(abs(statistic), dof))
    return TestStat(name, statistic, p, dof)


def _combined_abnormal_returns(
    model: NormalReturnModel, panel: AlignedPanel, layout: WindowLayout
) -> tuple[np.ndarray, np.ndarray]:
    """Abnormal returns over estimation plus widest event window (sorted rows)."""
    rows = np.asarray(sorted(set(layout.estimation_indices()) | set(layout.event_indices())))
    actual = panel.column(model.sector_id)[rows]
    return rows, actual - _predict(model, panel, rows)


def rank_statistic(values: np.ndarray, target: int) -> tuple[float, np.ndarray, bool]:
    """Demeaned rank of one observation over its permutation deviation.

    Ranks use midranks on ties; the scale is
    ``sqrt(mean((K - (T+1)/2)^2))``. Returns (statistic, ranks,
    degenerate); the statistic is NaN when every value ties.
    """
    values = np.asarray(values, dtype=float)
    T = len(values)
    ranks = stats.rankdata(values, method="average")
    center = (T + 1) / 2.0
    s_k = math.sqrt(float(np.mean((ranks - center) ** 2)))
    if s_k == 0.0:
        return float("nan"), ranks, True
    return (float(ranks[target]) - center) / s_k, ranks, False


def rank_p_value(rank: float, T: int) -> float:
    """Exact two-sided p-value of one rank among ``T`` exchangeable values.

    Under the null the event-day rank is uniform on 1..T, so
    ``p = 2 * min(P(K <= k), P(K >= k))``. For a single series the
    normalized rank statistic is bounded by ``sqrt(3)`` and normal tails
    would never reject; the permutation distribution is the correct
    reference.
    """
    lower = rank / T
    upper = (T + 1 - rank) / T
    return min(2.0 * min(lower, upper), 1.0)


def corrado_test(
    model: NormalReturnModel,
    panel: AlignedPanel,
    layout: WindowLayout,
    event_day_offset: int = 0,
) -> RankTestResult:
    """Rank test of the abnormal return at ``event day + offset``.

    Ranks are assigned over estimation plus widest event window (midranks
    on ties); the statistic is the demeaned target rank over the
    permutation standard deviation ``sqrt(mean((K - (T+1)/2)^2))``. The
    p-value uses the exact single-rank permutation distribution (see
    :func:`rank_p_value`).
    """
    rows, ar = _combined_abnormal_returns(model, panel, layout)
    T = len(ar)
    if T < 30:
        raise DataError(f"rank test needs at least 30 combined observations, have {T}")
    target_row = layout.event_index + event_day_offset
    where = np.nonzero(rows == target_row)[0]
    if not where.size:
        raise DataError(f"offset {event_day_offset} leaves the combined window")
    statistic, ranks, degenerate = rank_statistic(ar, int(where[0]))
    if degenerate:
        return RankTestResult(model.sector_id, statistic, float("nan"), ranks, degenerate=True)
    p = rank_p_value(float(ranks[int(where[0])]), T)
    return RankTestResult(model.sector_id, statistic, p, ranks)


def conditional_prob_test(
    model: NormalReturnModel,
    panel: AlignedPanel,
    layout: WindowLayout,
    half_width: int,
    reference_rate: float = 0.05,
) -> ConditionalProbResult:
    """How often did history produce a window move this extreme?

    Rolling ``(2w+1)``-day sums of estimation-window abnormal returns are
    compared against the observed event CAR ``c``: the count of sums
    ``<= c`` for non-positive ``c`` (``>= c`` for positive ``c``) over the
    number of rolling windows. The t statistic tests the rate against
    ``reference_rate`` with a binomial standard error.
    """
    est_rows = np.asarray(layout.estimation_indices())
    L = len(est_rows)
    if L < 50:
        raise DataError(f"conditional probability test needs at least 50 estimation days, have {L}")
    n_windows = L - 2 * half_width
    if n_windows < 30:
        raise DataError(
            f"estimation window leaves only {n_windows} rolling windows; need at least 30"
        )
    if not 0.0 < reference_rate < 1.0:
        raise DataError("reference_rate must lie strictly between 0 and 1")

    est_ar = panel.column(model.sector_id)[est_rows] - _predict(model, panel, est_rows)
    width = 2 * half_width + 1
    rolling = np.convolve(est_ar, np.ones(width), mode="valid")
    assert len(rolling) == n_windows

    ar = abnormal_returns(model, panel, layout)
    c = float(car_curve(ar, half_width)[1][-1])
    if c <= 0.0:
        count = int(np.sum(rolling <= c))
    else:
        count = int(np.sum(rolling >= c))
    cp = count / n_windows
    se = math.sqrt(reference_rate * (1.0 - reference_rate) / n_windows)
    t = (cp - reference_rate) / se
    p = 2.0 * float(stats.norm.sf(abs(t)))
    return ConditionalProbResult(model.sector_id, cp, t, p, n_windows, reference_rate)
