"""Shared builders for panel and layout fixtures."""

from __future__ import annotations

import numpy as np
import pytest

from eventlab.data import AlignedPanel
from eventlab.synthlab import MARKET, NoiseSpec, PanelSpec, simulate_panel, synthetic_axis
from eventlab.windows import EventSpec, build_layout


def make_spec(
    n_days=325,
    event_index=280,
    beta=0.8,
    alpha=0.0,
    shock=0.0,
    beta_shift=0.0,
    sigma=0.01,
    seed=0,
    noise="gaussian",
    nu=5.0,
):
    return PanelSpec(
        n_days=n_days,
        n_sectors=1,
        betas=(beta,),
        alphas=(alpha,),
        event_index=event_index,
        shock=(shock,),
        beta_shift=(beta_shift,),
        noise=NoiseSpec(kind=noise, sigma=sigma, nu=nu),
        seed=seed,
    )


def make_panel(**kwargs):
    panel, _ = simulate_panel(make_spec(**kwargs))
    return panel


def make_layout(n_days=325, event_index=280, widths=(2, 5, 10), estimation_length=None,
                post_event_length=30, gap=0):
    axis = synthetic_axis(n_days)
    spec = EventSpec(
        event_date=axis[event_index],
        estimation_length=estimation_length,
        pre_event_gap=gap,
        event_half_widths=tuple(widths),
        post_event_length=post_event_length,
    )
    return build_layout(axis, spec)


def exact_panel(premium: np.ndarray, sector: np.ndarray, sector_id="sector_0") -> AlignedPanel:
    """Panel with explicitly chosen premium and sector columns."""
    axis = synthetic_axis(len(premium))
    return AlignedPanel(axis, {MARKET: np.asarray(premium, dtype=float),
                               sector_id: np.asarray(sector, dtype=float)}, "test")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        name = report.nodeid.split("::")[-1].replace("test_criterion_", "")
        outcome = "PASS" if report.passed else "FAIL"
        print(f"\n[ACCEPTANCE] {name}: {outcome}")
