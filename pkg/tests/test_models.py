"""The normal-return, event-risk, and integration regressions."""

import math

import numpy as np
import pytest

from eventlab.models import (
    SINGLE_DAY,
    THROUGH_POST,
    DummySeries,
    abnormal_returns,
    build_dummy,
    fit_capm,
    fit_event_risk,
    fit_integration_model,
    fit_normal_model,
)
from eventlab.regression import EstimationError
from eventlab.synthlab import MARKET, simulate_panel

from conftest import exact_panel, make_layout, make_panel, make_spec


class TestFitCapm:
    def test_identity_portfolio(self, rng):
        premium = rng.normal(0, 0.01, 325)
        panel = exact_panel(premium, premium.copy())
        model = fit_capm(panel, make_layout(), "sector_0")
        assert model.alpha == pytest.approx(0.0, abs=1e-12)
        assert model.beta == pytest.approx(1.0, abs=1e-12)

    def test_constructed_linear_data(self, rng):
        premium = rng.normal(0, 0.01, 325)
        panel = exact_panel(premium, 2.0 * premium + 0.001)
        model = fit_capm(panel, make_layout(), "sector_0")
        assert model.alpha == pytest.approx(0.001, abs=1e-12)
        assert model.beta == pytest.approx(2.0, abs=1e-9)

    def test_zero_excess_return(self, rng):
        premium = rng.normal(0, 0.01, 325)
        panel = exact_panel(premium, np.zeros(325))
        model = fit_capm(panel, make_layout(), "sector_0")
        assert model.alpha == pytest.approx(0.0, abs=1e-15)
        assert model.beta == pytest.approx(0.0, abs=1e-15)

    def test_fit_uses_estimation_window_only(self, rng):
        premium = rng.normal(0, 0.01, 325)
        sector = 0.5 * premium
        layout = make_layout()
        # corrupt everything outside the estimation window
        sector_corrupt = sector.copy()
        lo, hi = layout.estimation_range
        sector_corrupt[hi + 1 :] += 99.0
        panel = exact_panel(premium, sector_corrupt)
        model = fit_capm(panel, layout, "sector_0")
        assert model.beta == pytest.approx(0.5, abs=1e-9)
        assert len(model.fit.residuals) == layout.estimation_length

    def test_factor_order_does_not_change_named_coefficients(self, rng):
        premium = rng.normal(0, 0.01, 325)
        other = rng.normal(0, 0.01, 325)
        sector = 0.4 * premium + 0.2 * other + rng.normal(0, 0.001, 325)
        panel = exact_panel(premium, sector).with_column("f", other)
        layout = make_layout()
        ab = fit_normal_model(panel, layout, "sector_0", (MARKET, "f"))
        ba = fit_normal_model(panel, layout, "sector_0", ("f", MARKET))
        assert ab.fit.coefficient(MARKET) == pytest.approx(
            ba.fit.coefficient(MARKET), rel=1e-10
        )
        assert ab.fit.coefficient("f") == pytest.approx(ba.fit.coefficient("f"), rel=1e-10)


class TestAbnormalReturns:
    def test_zero_abnormality_for_exact_model_data(self, rng):
        premium = rng.normal(0, 0.01, 325)
        panel = exact_panel(premium, 0.001 + 0.7 * premium)
        layout = make_layout()
        ar = abnormal_returns(fit_capm(panel, layout, "sector_0"), panel, layout)
        assert np.max(np.abs(ar.values)) < 1e-12

    def test_shock_injection_recovered_exactly_by_paired_seeds(self):
        base_panel, _ = simulate_panel(make_spec(seed=77, shock=0.0))
        shocked_panel, _ = simulate_panel(make_spec(seed=77, shock=-0.05))
        layout = make_layout()
        ar_base = abnormal_returns(fit_capm(base_panel, layout, "sector_0"),
                                   base_panel, layout)
        ar_shock = abnormal_returns(fit_capm(shocked_panel, layout, "sector_0"),
                                    shocked_panel, layout)
        diff = ar_shock.values - ar_base.values
        at_zero = ar_shock.offsets.index(0)
        assert diff[at_zero] == pytest.approx(-0.05, abs=1e-12)
        diff[at_zero] = 0.0
        assert np.max(np.abs(diff)) < 1e-12

    def test_offsets_and_dates_cover_widest_window(self):
        panel = make_panel()
        layout = make_layout()
        ar = abnormal_returns(fit_capm(panel, layout, "sector_0"), panel, layout)
        assert ar.offsets == tuple(range(-10, 11))
        assert len(ar.dates) == 21
        assert ar.dates[10] == layout.axis[layout.event_index]

    def test_translation_consistency(self, rng):
        panel = make_panel(seed=5)
        layout = make_layout()
        model = fit_capm(panel, layout, "sector_0")
        ar = abnormal_returns(model, panel, layout)
        shifted = panel.column("sector_0").copy()
        rows = np.asarray(layout.event_indices())
        shifted[rows] += 0.0125
        panel2 = panel.with_column("sector_0", shifted)
        model2 = fit_capm(panel2, layout, "sector_0")
        ar2 = abnormal_returns(model2, panel2, layout)
        assert ar2.values - ar.values == pytest.approx(np.full(21, 0.0125), abs=1e-12)

    def test_missing_event_window_data_names_dates(self):
        panel = make_panel()
        layout = make_layout()
        broken = panel.column("sector_0").copy()
        broken[layout.event_index] = np.nan
        panel2 = panel.with_column("sector_0", broken)
        model = fit_capm(panel2, layout, "sector_0")
        with pytest.raises(Exception, match=layout.axis[layout.event_index].isoformat()):
            abnormal_returns(model, panel2, layout)


class TestBuildDummy:
    def test_single_day(self):
        layout = make_layout()
        dummy = build_dummy(layout, SINGLE_DAY)
        assert dummy.values.sum() == 1.0
        assert dummy.values[layout.event_index] == 1.0
        assert dummy.active_range == (layout.event_index, layout.event_index)

    def test_through_post_window_has_post_plus_one_ones(self):
        layout = make_layout(post_event_length=30)
        dummy = build_dummy(layout, THROUGH_POST)
        assert dummy.values.sum() == 31.0
        assert dummy.active_range == (layout.event_index, layout.event_index + 30)

    @pytest.mark.parametrize("duration", [SINGLE_DAY, THROUGH_POST])
    def test_sum_equals_active_range_length(self, duration):
        layout = make_layout()
        dummy = build_dummy(layout, duration)
        lo, hi = dummy.active_range
        assert dummy.values.sum() == hi - lo + 1
        # ones exactly on the active range
        inside = dummy.values[lo : hi + 1]
        assert np.all(inside == 1.0)
        assert dummy.values.sum() == inside.sum()

    def test_unknown_duration(self):
        with pytest.raises(ValueError, match="duration"):
            build_dummy(make_layout(), "forever")


class TestFitEventRisk:
    def test_identity_beta_post_equals_pre_plus_shift(self):
        panel = make_panel(beta_shift=0.3, seed=3)
        layout = make_layout()
        fit = fit_event_risk(panel, layout, build_dummy(layout), "sector_0")
        assert fit.beta_post == fit.beta_pre + fit.immediate_shift

    def test_null_shift_within_two_standard_errors(self):
        hits = 0
        runs = 400
        for seed in range(runs):
            panel, _ = simulate_panel(make_spec(seed=seed))
            layout = make_layout()
            fit = fit_event_risk(panel, layout, build_dummy(layout), "sector_0")
            hits += abs(fit.beta2) < 2.0 * fit.se_beta2
        assert hits >= 0.90 * runs

    def test_beta_shift_recovery(self):
        hits = 0
        runs = 200
        for seed in range(runs):
            panel, _ = simulate_panel(make_spec(beta=0.46, beta_shift=0.46, seed=10_000 + seed))
            layout = make_layout()
            fit = fit_event_risk(panel, layout, build_dummy(layout), "sector_0")
            hits += abs(fit.beta2 - 0.46) <= 3.0 * fit.se_beta2
        assert hits >= 0.95 * runs

    def test_zero_premium_is_rank_error(self):
        panel = make_panel()
        layout = make_layout()
        zeroed = panel.with_column(MARKET, np.zeros(len(panel)))
        with pytest.raises(EstimationError, match="rank deficient"):
            fit_event_risk(zeroed, layout, build_dummy(layout), "sector_0")

    def test_all_zero_dummy_refused(self):
        panel = make_panel()
        layout = make_layout()
        dead = DummySeries(np.zeros(len(panel)), (layout.event_index, layout.event_index))
        with pytest.raises(EstimationError, match="rank deficient"):
            fit_event_risk(panel, layout, dead, "sector_0")

    def test_single_day_dummy_is_saturated_and_interpolates(self):
        panel = make_panel(seed=21, shock=-0.04)
        layout = make_layout()
        dummy = build_dummy(layout, SINGLE_DAY)
        fit = fit_event_risk(panel, layout, dummy, "sector_0")
        assert fit.saturated
        assert "saturated" in fit.note
        assert math.isnan(fit.se_beta2) and math.isnan(fit.se_beta3)
        x0 = panel.column(MARKET)[layout.event_index]
        y0 = panel.column("sector_0")[layout.event_index]
        fitted = fit.beta0 + fit.beta1 * x0 + fit.beta2 * x0 + fit.beta3
        assert fitted == pytest.approx(y0, abs=1e-12)

    def test_dummy_partition_identity_on_the_event_design(self):
        panel = make_panel(beta_shift=0.4, seed=9)
        layout = make_layout()
        dummy = build_dummy(layout)
        pooled = fit_event_risk(panel, layout, dummy, "sector_0")
        from eventlab.models import _fit_sample
        from eventlab.regression import DesignMatrix, ols

        rows = _fit_sample(layout, "windows")
        dv = dummy.values[rows]
        y = panel.column("sector_0")[rows]
        x = panel.column(MARKET)[rows]
        pre = ols(DesignMatrix.from_columns({"x": x[dv == 0]}), y[dv == 0])
        post = ols(DesignMatrix.from_columns({"x": x[dv == 1]}), y[dv == 1])
        assert pooled.beta0 == pytest.approx(pre.coefficient("const"), abs=1e-8)
        assert pooled.beta1 == pytest.approx(pre.coefficient("x"), abs=1e-8)
        assert pooled.beta0 + pooled.beta3 == pytest.approx(post.coefficient("const"), abs=1e-8)
        assert pooled.beta_post == pytest.approx(post.coefficient("x"), abs=1e-8)

    def test_full_sample_option(self):
        panel = make_panel(seed=13)
        layout = make_layout()
        dummy = build_dummy(layout)
        windows_fit = fit_event_risk(panel, layout, dummy, "sector_0", sample="windows")
        full_fit = fit_event_risk(panel, layout, dummy, "sector_0", sample="full")
        assert full_fit.fit.n == len(panel)
        assert windows_fit.fit.n == len(set(layout.estimation_indices())
                                        | set(layout.event_indices())
                                        | set(layout.post_indices()))


class TestFitIntegrationModel:
    def test_zero_foreign_columns_reproduce_event_fit(self):
        panel = make_panel(seed=31).with_column("us", np.zeros(325))
        layout = make_layout()
        dummy = build_dummy(layout)
        plain = fit_event_risk(panel, layout, dummy, "sector_0")
        augmented = fit_integration_model(panel, layout, dummy, "sector_0", ("us",))
        assert augmented.dropped_factors == ("us",)
        assert augmented.foreign_coefficients == {"us": 0.0}
        for attr in ("beta0", "beta1", "beta2", "beta3"):
            assert getattr(augmented.event, attr) == pytest.approx(
                getattr(plain, attr), abs=1e-10
            )

    def test_constructed_foreign_loading_recovered(self):
        hits = 0
        runs = 100
        for seed in range(runs):
            rng = np.random.default_rng(50_000 + seed)
            panel = make_panel(seed=seed)
            foreign = rng.normal(0, 0.01, 325)
            sector = panel.column("sector_0") + 0.5 * foreign
            panel = panel.with_column("us", foreign).with_column("sector_0", sector)
            layout = make_layout()
            dummy = build_dummy(layout)
            fit = fit_integration_model(panel, layout, dummy, "sector_0", ("us",))
            se = fit.foreign_std_errors["us"]
            hits += abs(fit.foreign_coefficients["us"] - 0.5) <= 3.0 * se
        assert hits >= 0.95 * runs

    def test_collinear_foreign_factor_names_column(self):
        panel = make_panel(seed=8)
        collinear = 2.0 * panel.column(MARKET)
        panel = panel.with_column("eu", collinear)
        layout = make_layout()
        with pytest.raises(EstimationError, match="rank deficient"):
            fit_integration_model(panel, layout, build_dummy(layout), "sector_0", ("eu",))

    def test_saturated_single_day_with_foreign_controls(self, rng):
        panel = make_panel(seed=12)
        panel = panel.with_column("us", rng.normal(0, 0.01, 325))
        layout = make_layout()
        dummy = build_dummy(layout, SINGLE_DAY)
        fit = fit_integration_model(panel, layout, dummy, "sector_0", ("us",))
        assert fit.event.saturated
        assert "us" in fit.foreign_coefficients
