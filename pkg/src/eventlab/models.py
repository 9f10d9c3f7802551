"""Normal-return, event-risk, and market-integration regressions.

Three specifications over one aligned panel:

* a normal-return benchmark (sector excess return on the market risk
  premium, estimation window only) that prices the counterfactual;
* a dummy-interaction model that splits systematic risk into a pre-event
  level, an event-induced slope shift, and an intercept shift;
* the same interaction model augmented with foreign market premia to
  control for cross-market integration.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date

import numpy as np

from .data import AlignedPanel, DataError
from .regression import DesignMatrix, RegressionFit, ols
from .windows import WindowLayout

SINGLE_DAY = "single-day"
THROUGH_POST = "through-post-window"

SAMPLE_WINDOWS = "windows"
SAMPLE_FULL = "full"

PREMIUM = "premium"
EVENT = "event"
INTERACTION = "premium_x_event"


@dataclass(frozen=True)
class NormalReturnModel:
    """Expected-return benchmark fitted on the estimation window only."""

    sector_id: str
    factor_ids: tuple[str, ...]
    fit: RegressionFit

    @property
    def alpha(self) -> float:
        return self.fit.coefficient("const")

    @property
    def beta(self) -> float:
        return self.fit.coefficient(self.factor_ids[0])


@dataclass(frozen=True)
class ArSeries:
    """Abnormal returns over the widest event window, indexed by relative day."""

    sector_id: str
    offsets: tuple[int, ...]
    dates: tuple[date, ...]
    values: np.ndarray
    sigma2_estimation: float
    dof: int

    def value_at(self, offset: int) -> float:
        return float(self.values[self.offsets.index(offset)])


@dataclass(frozen=True)
class DummySeries:
    """0/1 event indicator on the panel axis, 1 exactly on ``active_range``."""

    values: np.ndarray
    active_range: tuple[int, int]

    def active_count(self, indices=None) -> int:
        if indices is None:
            return int(self.values.sum())
        return int(self.values[np.asarray(indices)].sum())


@dataclass(frozen=True)
class EventRiskFit:
    """Coefficients of the dummy-interaction risk model.

    ``beta_post = beta_pre + immediate_shift`` holds by construction.
    """

    sector_id: str
    beta0: float
    beta1: float
    beta2: float
    beta3: float
    se_beta0: float
    se_beta1: float
    se_beta2: float
    se_beta3: float
    fit: RegressionFit
    saturated: bool = False
    note: str = ""

    @property
    def beta_pre(self) -> float:
        return self.beta1

    @property
    def immediate_shift(self) -> float:
        return self.beta2

    @property
    def beta_post(self) -> float:
        return self.beta_pre + self.immediate_shift


@dataclass(frozen=True)
class IntegrationRiskFit:
    """Event-risk model augmented with foreign market premium controls."""

    event: EventRiskFit
    foreign_coefficients: dict[str, float]
    foreign_std_errors: dict[str, float]
    dropped_factors: tuple[str, ...] = ()


def fit_normal_model(
    panel: AlignedPanel,
    layout: WindowLayout,
    sector_id: str,
    factor_ids: tuple[str, ...],
    robust: bool = False,
) -> NormalReturnModel:
    """OLS of sector excess return on intercept + factors, estimation window only."""
    rows = np.asarray(layout.estimation_indices())
    y = panel.column(sector_id)[rows]
    X = DesignMatrix.from_columns(
        {fid: panel.column(fid)[rows] for fid in factor_ids}, intercept=True
    )
    return NormalReturnModel(sector_id, tuple(factor_ids), ols(X, y, robust=robust))


def fit_capm(
    panel: AlignedPanel,
    layout: WindowLayout,
    sector_id: str,
    market_id: str = "market_premium",
    robust: bool = False,
) -> NormalReturnModel:
    """Single-factor normal-return model on the market risk premium."""
    return fit_normal_model(panel, layout, sector_id, (market_id,), robust=robust)


def abnormal_returns(
    model: NormalReturnModel, panel: AlignedPanel, layout: WindowLayout
) -> ArSeries:
    """Actual minus predicted excess return over the widest event window."""
    rows = np.asarray(layout.event_indices())
    actual = panel.column(model.sector_id)[rows]
    predicted = _predict(model, panel, rows)
    bad = ~np.isfinite(actual) | ~np.isfinite(predicted)
    if bad.any():
        missing = [layout.axis[rows[i]].isoformat() for i in np.nonzero(bad)[0]]
        raise DataError(f"{model.sector_id}: missing event-window data on {missing}")
    return ArSeries(
        sector_id=model.sector_id,
        offsets=tuple(layout.offsets()),
        dates=tuple(layout.axis[i] for i in rows),
        values=actual - predicted,
        sigma2_estimation=model.fit.sigma2,
        dof=model.fit.dof,
    )


def _predict(model: NormalReturnModel, panel: AlignedPanel, rows: np.ndarray) -> np.ndarray:
    pred = np.full(len(rows), model.fit.coefficient("const"))
    for fid in model.factor_ids:
        pred += model.fit.coefficient(fid) * panel.column(fid)[rows]
    return pred


def build_dummy(layout: WindowLayout, duration: str = THROUGH_POST) -> DummySeries:
    """Event indicator: 1 on the event day only, or through the post window."""
    if duration == SINGLE_DAY:
        active = (layout.event_index, layout.event_index)
    elif duration == THROUGH_POST:
        active = (layout.event_index, layout.post_range[1])
    else:
        raise ValueError(f"unknown dummy duration {duration!r}")
    values = np.zeros(len(layout.axis))
    values[active[0] : active[1] + 1] = 1.0
    return DummySeries(values, active)


def _fit_sample(layout: WindowLayout, sample: str) -> np.ndarray:
    if sample == SAMPLE_FULL:
        return np.arange(len(layout.axis))
    if sample == SAMPLE_WINDOWS:
        merged = sorted(
            set(layout.estimation_indices())
            | set(layout.event_indices())
            | set(layout.post_indices())
        )
        return np.asarray(merged)
    raise ValueError(f"unknown fit sample {sample!r}")


def fit_event_risk(
    panel: AlignedPanel,
    layout: WindowLayout,
    dummy: DummySeries,
    sector_id: str,
    market_id: str = "market_premium",
    sample: str = SAMPLE_WINDOWS,
    robust: bool = False,
) -> EventRiskFit:
    """Dummy-interaction regression of sector excess return.

    Columns are intercept, market premium, premium*event, event. With a
    single active event day the slope and intercept shifts cannot be
    separated; the fit then interpolates that day exactly (minimum-norm
    split) and is flagged saturated with undefined event standard errors.
    """
    rows = _fit_sample(layout, sample)
    y = panel.column(sector_id)[rows]
    premium = panel.column(market_id)[rows]
    dv = dummy.values[rows]

    active = int(dv.sum())
    if active == 1:
        return _fit_saturated(sector_id, y, premium, dv, robust)

    X = DesignMatrix.from_columns(
        {PREMIUM: premium, INTERACTION: premium * dv, EVENT: dv}, intercept=True
    )
    fit = ols(X, y, robust=robust)
    return EventRiskFit(
        sector_id=sector_id,
        beta0=fit.coefficient("const"),
        beta1=fit.coefficient(PREMIUM),
        beta2=fit.coefficient(INTERACTION),
        beta3=fit.coefficient(EVENT),
        se_beta0=fit.std_error("const"),
        se_beta1=fit.std_error(PREMIUM),
        se_beta2=fit.std_error(INTERACTION),
        se_beta3=fit.std_error(EVENT),
        fit=fit,
    )


def _fit_saturated(
    sector_id: str, y: np.ndarray, premium: np.ndarray, dv: np.ndarray, robust: bool
) -> EventRiskFit:
    # One active day: fit the base model on the inactive days, then split
    # that day's residual between the slope and intercept shifts with the
    # minimum-norm solution of beta2*x0 + beta3 = residual0.
    inactive = dv == 0.0
    base = ols(
        DesignMatrix.from_columns({PREMIUM: premium[inactive]}, intercept=True),
        y[inactive],
        robust=robust,
    )
    i0 = int(np.nonzero(dv)[0][0])
    x0 = premium[i0]
    resid0 = y[i0] - base.coefficient("const") - base.coefficient(PREMIUM) * x0
    scale = x0 * x0 + 1.0
    return EventRiskFit(
        sector_id=sector_id,
        beta0=base.coefficient("const"),
        beta1=base.coefficient(PREMIUM),
        beta2=resid0 * x0 / scale,
        beta3=resid0 / scale,
        se_beta0=base.std_error("const"),
        se_beta1=base.std_error(PREMIUM),
        se_beta2=float("nan"),
        se_beta3=float("nan"),
        fit=base,
        saturated=True,
        note="saturated: event-day standard errors undefined",
    )


def fit_integration_model(
    panel: AlignedPanel,
    layout: WindowLayout,
    dummy: DummySeries,
    sector_id: str,
    foreign_ids: tuple[str, ...],
    market_id: str = "market_premium",
    sample: str = SAMPLE_WINDOWS,
    robust: bool = False,
) -> IntegrationRiskFit:
    """Event-risk regression with one extra column per foreign premium.

    All-zero foreign columns are dropped (coefficient 0, no standard
    error) so a null augmentation reproduces the plain event-risk fit;
    genuinely collinear foreign factors raise naming the column.
    """
    rows = _fit_sample(layout, sample)
    y = panel.column(sector_id)[rows]
    premium = panel.column(market_id)[rows]
    dv = dummy.values[rows]

    kept: dict[str, np.ndarray] = {}
    dropped: list[str] = []
    for fid in foreign_ids:
        col = panel.column(fid)[rows]
        if np.all(col == 0.0):
            dropped.append(fid)
        else:
            kept[fid] = col

    if int(dv.sum()) == 1:
        # slope and intercept shifts are inseparable on one day regardless
        # of extra controls; fit the controls on the inactive days only
        inactive = dv == 0.0
        base_cols = {PREMIUM: premium[inactive]}
        base_cols.update({fid: col[inactive] for fid, col in kept.items()})
        base = ols(DesignMatrix.from_columns(base_cols), y[inactive], robust=robust)
        i0 = int(np.nonzero(dv)[0][0])
        pred0 = base.coefficient("const") + base.coefficient(PREMIUM) * premium[i0]
        for fid, col in kept.items():
            pred0 += base.coefficient(fid) * col[i0]
        resid0 = y[i0] - pred0
        scale = premium[i0] ** 2 + 1.0
        event = EventRiskFit(
            sector_id=sector_id,
            beta0=base.coefficient("const"),
            beta1=base.coefficient(PREMIUM),
            beta2=resid0 * premium[i0] / scale,
            beta3=resid0 / scale,
            se_beta0=base.std_error("const"),
            se_beta1=base.std_error(PREMIUM),
            se_beta2=float("nan"),
            se_beta3=float("nan"),
            fit=base,
            saturated=True,
            note="saturated: event-day standard errors undefined",
        )
        coefs = {fid: base.coefficient(fid) for fid in kept}
        errors = {fid: base.std_error(fid) for fid in kept}
        for fid in dropped:
            coefs[fid] = 0.0
            errors[fid] = float("nan")
        return IntegrationRiskFit(event, coefs, errors, tuple(dropped))

    columns = {PREMIUM: premium, INTERACTION: premium * dv, EVENT: dv}
    columns.update(kept)
    X = DesignMatrix.from_columns(columns, intercept=True)
    fit = ols(X, y, robust=robust)

    event = EventRiskFit(
        sector_id=sector_id,
        beta0=fit.coefficient("const"),
        beta1=fit.coefficient(PREMIUM),
        beta2=fit.coefficient(INTERACTION),
        beta3=fit.coefficient(EVENT),
        se_beta0=fit.std_error("const"),
        se_beta1=fit.std_error(PREMIUM),
        se_beta2=fit.std_error(INTERACTION),
        se_beta3=fit.std_error(EVENT),
        fit=fit,
    )
    coefs = {fid: fit.coefficient(fid) for fid in kept}
    errors = {fid: fit.std_error(fid) for fid in kept}
    for fid in dropped:
        coefs[fid] = 0.0
        errors[fid] = float("nan")
    return IntegrationRiskFit(event, coefs, errors, tuple(dropped))
