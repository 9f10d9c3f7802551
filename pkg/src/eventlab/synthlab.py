"""Synthetic panels and Monte-Carlo size/power studies.

The generator draws a market premium path and per-sector idiosyncratic
noise, then composes sector excess returns with a known alpha, beta, an
event-day shock, and a post-event beta shift. Randomness comes from
numpy's PCG64 generator seeded through ``SeedSequence``; replication ``i``
of a study always uses child ``i`` of ``SeedSequence(spec.seed)``, so
results are bit-identical across machines and across worker counts.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from datetime import date, timedelta
from pathlib import Path
from typing import Mapping

import numpy as np

from .data import AlignedPanel
from .inference import ar_t_test, car, conditional_prob_test, corrado_test
from .models import abnormal_returns, fit_capm
from .windows import EventSpec, build_layout

GAUSSIAN = "gaussian"
STUDENT_T = "student_t"

MARKET = "market_premium"


def sector_name(index: int) -> str:
    return f"sector_{index}"


@dataclass(frozen=True)
class NoiseSpec:
    """Innovation distribution; Student-t draws are rescaled to unit variance."""

    kind: str = GAUSSIAN
    sigma: float = 0.01
    nu: float = 5.0

    def __post_init__(self) -> None:
        if self.kind not in (GAUSSIAN, STUDENT_T):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.sigma <= 0.0:
            raise ValueError("sigma must be positive")
        if self.kind == STUDENT_T and self.nu <= 2.0:
            raise ValueError("student_t noise needs nu > 2 for a finite variance")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == GAUSSIAN:
            return rng.normal(0.0, self.sigma, n)
        unit = rng.standard_t(self.nu, n) * math.sqrt((self.nu - 2.0) / self.nu)
        return unit * self.sigma


@dataclass(frozen=True)
class PanelSpec:
    """Data-generating process for one synthetic market panel."""

    n_days: int
    n_sectors: int
    betas: tuple[float, ...]
    alphas: tuple[float, ...]
    event_index: int
    shock: tuple[float, ...]
    beta_shift: tuple[float, ...]
    noise: NoiseSpec
    seed: int

    def __post_init__(self) -> None:
        for field_name in ("betas", "alphas", "shock", "beta_shift"):
            values = tuple(float(v) for v in getattr(self, field_name))
            object.__setattr__(self, field_name, values)
            if len(values) != self.n_sectors:
                raise ValueError(f"{field_name} must list one value per sector")
        if self.n_days < 3:
            raise ValueError("n_days must be at least 3")
        if not 0 < self.event_index < self.n_days - 1:
            raise ValueError("event_index must be interior to the panel")


@dataclass(frozen=True)
class TrueParams:
    """Generating parameters echoed alongside a simulated panel."""

    market_id: str
    sector_ids: tuple[str, ...]
    betas: tuple[float, ...]
    alphas: tuple[float, ...]
    event_index: int
    shock: tuple[float, ...]
    beta_shift: tuple[float, ...]
    seed: int


def synthetic_axis(n_days: int, start: date = date(2017, 1, 1)) -> tuple[date, ...]:
    """Consecutive Sunday-through-Thursday trading days."""
    axis = []
    day = start
    while len(axis) < n_days:
        if day.weekday() not in (4, 5):  # closed Friday and Saturday
            axis.append(day)
        day += timedelta(days=1)
    return tuple(axis)


def _generate(spec: PanelSpec, rng: np.random.Generator) -> tuple[AlignedPanel, TrueParams]:
    n = spec.n_days
    t = np.arange(n)
    dv = (t >= spec.event_index).astype(float)
    pulse = (t == spec.event_index).astype(float)

    premium = spec.noise.draw(rng, n)
    columns: dict[str, np.ndarray] = {MARKET: premium}
    for s in range(spec.n_sectors):
        eps = spec.noise.draw(rng, n)
        columns[sector_name(s)] = (
            spec.alphas[s]
            + (spec.betas[s] + spec.beta_shift[s] * dv) * premium
            + spec.shock[s] * pulse
            + eps
        )
    panel = AlignedPanel(synthetic_axis(n), columns, "synthetic")
    truth = TrueParams(
        MARKET,
        tuple(sector_name(s) for s in range(spec.n_sectors)),
        spec.betas,
        spec.alphas,
        spec.event_index,
        spec.shock,
        spec.beta_shift,
        spec.seed,
    )
    return panel, truth


def simulate_panel(spec: PanelSpec) -> tuple[AlignedPanel, TrueParams]:
    """Deterministic panel draw: same spec and seed, bit-identical output."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(spec.seed)))
    return _generate(spec, rng)


def replication_rng(seed: int, replication: int, total: int) -> np.random.Generator:
    """Generator for one replication: child ``i`` of ``SeedSequence(seed)``."""
    child = np.random.SeedSequence(seed).spawn(total)[replication]
    return np.random.Generator(np.random.PCG64(child))


def event_spec_for(
    spec: PanelSpec,
    event_half_widths: tuple[int, ...] = (2, 5, 10),
    post_event_length: int | None = None,
) -> EventSpec:
    """Window layout matching a panel spec: all pre-event history, gap 0."""
    axis = synthetic_axis(spec.n_days)
    w_max = max(event_half_widths)
    if post_event_length is None:
        post_event_length = min(30, spec.n_days - 1 - spec.event_index)
    return EventSpec(
        event_date=axis[spec.event_index],
        estimation_length=spec.event_index - w_max,
        pre_event_gap=0,
        event_half_widths=tuple(event_half_widths),
        post_event_length=post_event_length,
    )


def panel_p_values(
    panel: AlignedPanel,
    spec: PanelSpec,
    event_half_widths: tuple[int, ...] = (2, 5, 10),
    post_event_length: int | None = None,
    cp_half_width: int = 5,
    sector: int = 0,
) -> dict[str, float]:
    """p-values of every study statistic for one sector of one panel."""
    es = event_spec_for(spec, event_half_widths, post_event_length)
    layout = build_layout(panel.dates, es)
    model = fit_capm(panel, layout, sector_name(sector), market_id=MARKET)
    ar = abnormal_returns(model, panel, layout)
    out = {"ar": ar_t_test(ar.value_at(0), ar.sigma2_estimation, ar.dof).p_value}
    for w in event_half_widths:
        out[f"car{w}"] = car(ar, w).p_value
    out["corrado"] = corrado_test(model, panel, layout).p_value
    out["cp"] = conditional_prob_test(model, panel, layout, cp_half_width).p_value
    return out


@dataclass(frozen=True)
class RejectionCell:
    """One (spec, statistic) entry of a size/power table."""

    spec: str
    statistic: str
    rejection_rate: float
    mc_std_error: float
    n_replications: int
    alpha: float


@dataclass(frozen=True)
class RejectionTable:
    cells: tuple[RejectionCell, ...]

    def rate(self, spec: str, statistic: str) -> float:
        for cell in self.cells:
            if cell.spec == spec and cell.statistic == statistic:
                return cell.rejection_rate
        raise KeyError(f"no cell for spec={spec!r} statistic={statistic!r}")

    def to_csv(self, destination) -> None:
        own = isinstance(destination, (str, Path))
        handle = open(destination, "w", encoding="utf-8", newline="") if own else destination
        try:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(
                ["spec", "statistic", "rejection_rate", "mc_std_error", "n_replications", "alpha"]
            )
            for cell in self.cells:
                writer.writerow(
                    [
                        cell.spec,
                        cell.statistic,
                        repr(cell.rejection_rate),
                        repr(cell.mc_std_error),
                        cell.n_replications,
                        repr(cell.alpha),
                    ]
                )
        finally:
            if own:
                handle.close()

    def to_json(self, destination) -> None:
        payload = {"schema_version": "1", "cells": [asdict(cell) for cell in self.cells]}
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
        if isinstance(destination, (str, Path)):
            Path(destination).write_text(text, encoding="utf-8")
        else:
            destination.write(text)


def size_power_study(
    specs: Mapping[str, PanelSpec],
    n_replications: int,
    alpha: float = 0.05,
    event_half_widths: tuple[int, ...] = (2, 5, 10),
    post_event_length: int | None = None,
    cp_half_width: int = 5,
    workers: int = 1,
) -> RejectionTable:
    """Rejection rates of every statistic under each panel spec.

    Each replication draws a fresh panel from its own spawned seed and
    records whether each test rejects at ``alpha``. Results do not depend
    on ``workers``: the replication-to-seed mapping is fixed and each
    replication writes its own row of the result matrix.
    """
    if n_replications < 200:
        raise ValueError("size/power studies need at least 200 replications")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly between 0 and 1")

    stat_names = ["ar"] + [f"car{w}" for w in event_half_widths] + ["corrado", "cp"]
    cells: list[RejectionCell] = []
    for label, spec in specs.items():
        children = np.random.SeedSequence(spec.seed).spawn(n_replications)
        rejected = np.zeros((n_replications, len(stat_names)), dtype=bool)

        def run_one(i: int, spec=spec, children=children, rejected=rejected) -> None:
            rng = np.random.Generator(np.random.PCG64(children[i]))
            panel, _ = _generate(spec, rng)
            p_values = panel_p_values(
                panel, spec, event_half_widths, post_event_length, cp_half_width
            )
            for j, name in enumerate(stat_names):
                rejected[i, j] = p_values[name] < alpha

        if workers <= 1:
            for i in range(n_replications):
                run_one(i)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(run_one, range(n_replications)))

        for j, name in enumerate(stat_names):
            rate = float(rejected[:, j].mean())
            se = math.sqrt(rate * (1.0 - rate) / n_replications)
            cells.append(RejectionCell(label, name, rate, se, n_replications, alpha))
    return RejectionTable(tuple(cells))
