"""Study orchestration and report emission.

``run_study`` executes the full pipeline for every configured sector on a
single shared window layout, collecting per-sector failures instead of
aborting the study. ``write_report`` renders the result as fixed-width
text, CSV, markdown, and JSON tables plus per-sector CAR-curve data files.
Rendered tables show percent-scale abnormal returns rounded to two
decimals; CSV and JSON carry full precision. Significance stars are a pure
function of the computed p-values: *** below 1%, ** below 5%, * below 10%.
"""

from __future__ import annotations

import csv
import json
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np

from . import __version__
from .config import DataSection, StudyConfig
from .data import (
    AlignedPanel,
    CsvSchema,
    DataError,
    align,
    annualized_percent_to_daily,
    load_price_series,
    load_rate_series,
    log_returns,
)
from .inference import (
    CarResult,
    ConditionalProbResult,
    RankTestResult,
    ar_t_test,
    car,
    car_curve,
    conditional_prob_test,
    corrado_test,
)
from .models import (
    ArSeries,
    EventRiskFit,
    IntegrationRiskFit,
    abnormal_returns,
    build_dummy,
    fit_capm,
    fit_event_risk,
    fit_integration_model,
    fit_normal_model,
)
from .regression import (
    DesignMatrix,
    EstimationError,
    TestStat,
    arch_lm_test,
    chow_test,
    jarque_bera,
    wald_test,
)
from .windows import EventSpec, WindowError, WindowLayout, build_layout

SCHEMA_VERSION = "1"
MARKET = "market_premium"

PERCENT_NOTE = "AR and CAR values are in percent (natural-unit values times 100)."
STARS_NOTE = "***, **, * mark p-values below 0.01, 0.05, and 0.10."


class StudyDataError(ValueError):
    """Shared input (market, risk-free, foreign) could not be prepared."""


def stars(p_value: float) -> str:
    """Significance marker for a p-value."""
    if p_value < 0.01:
        return "***"
    if p_value < 0.05:
        return "**"
    if p_value < 0.10:
        return "*"
    return ""


@dataclass(frozen=True)
class SectorResult:
    sector_id: str
    ar_series: ArSeries
    event_day_ar: float
    ar_test: TestStat
    cars: tuple[CarResult, ...]
    corrado: RankTestResult
    conditional: ConditionalProbResult
    risk: EventRiskFit
    integration: IntegrationRiskFit | None
    integration_ar: float | None
    integration_ar_test: TestStat | None
    diagnostics: dict[str, TestStat]
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class SectorFailure:
    sector_id: str
    stage: str
    message: str


@dataclass(frozen=True)
class StudyReport:
    schema_version: str
    tool_version: str
    config_hash: str
    resolved_config: dict
    axis_start: date
    axis_end: date
    event_date: date
    event_index: int
    estimation_start: date
    estimation_end: date
    post_end: date
    half_widths: tuple[int, ...]
    sectors: tuple[SectorResult, ...]
    failures: tuple[SectorFailure, ...]
    notes: tuple[str, ...]

    @property
    def all_failed(self) -> bool:
        return not self.sectors and bool(self.failures)


def _schema(section: DataSection, entry, default_value_column: str) -> CsvSchema:
    return CsvSchema(
        date_column=entry.date_column or section.date_column,
        value_column=entry.value_column or default_value_column,
        date_format=section.date_format,
    )


def _note_skipped(notes: list[str], instrument_id: str, skipped) -> None:
    if skipped:
        lines = ", ".join(str(row.line_number) for row in skipped[:10])
        more = "" if len(skipped) <= 10 else f" (+{len(skipped) - 10} more)"
        notes.append(
            f"{instrument_id}: skipped {len(skipped)} unparseable row(s) at line(s) {lines}{more}"
        )


def _ingest_files(config: StudyConfig, notes: list[str]):
    """Load every input file and build the home panel plus foreign columns.

    The home axis is the intersection of the market and risk-free
    calendars; each sector must cover that axis in full. Foreign premia
    are forward-filled onto the home axis within the configured limit.
    """
    section = config.data
    assert section is not None

    def read_prices(entry, role: str):
        result = load_price_series(
            config.resolve_path(entry.path), entry.instrument_id,
            _schema(section, entry, section.price_column),
        )
        _note_skipped(notes, f"{role} {entry.instrument_id}", result.skipped)
        return result.series

    try:
        market_returns = log_returns(read_prices(section.market, "market"))
        rf_result = load_rate_series(
            config.resolve_path(section.risk_free.path),
            section.risk_free.instrument_id,
            _schema(section, section.risk_free, section.rate_column),
        )
        _note_skipped(notes, f"risk-free {section.risk_free.instrument_id}", rf_result.skipped)
        risk_free = rf_result.series
        if section.risk_free_kind == "annualized_percent":
            risk_free = annualized_percent_to_daily(risk_free, section.day_count)

        foreign_series = []
        for entry in section.foreign:
            if entry.kind == "premium":
                result = load_rate_series(
                    config.resolve_path(entry.path), entry.instrument_id,
                    _schema(section, entry, section.rate_column),
                )
                _note_skipped(notes, f"foreign {entry.instrument_id}", result.skipped)
                foreign_series.append(result.series)
            else:
                foreign_series.append(log_returns(read_prices(entry, "foreign")))

        if section.foreign and section.alignment_policy == "intersection":
            # shrink the home axis to days every market trades
            base = align([market_returns, risk_free, *foreign_series],
                         policy="intersection")
            filled = base
        else:
            base = align([market_returns, risk_free], policy="intersection")
            filled = None
            if section.foreign:
                anchor = _axis_anchor(base.dates, base.column(risk_free.instrument_id))
                filled = align(
                    [anchor, *foreign_series],
                    policy="forward-fill-limited",
                    fill_limit=config.model.forward_fill_limit,
                )
    except (DataError, OSError) as exc:
        raise StudyDataError(f"shared inputs: {exc}") from exc

    axis = base.dates
    rf_values = base.column(risk_free.instrument_id)
    premium = base.column(market_returns.instrument_id) - rf_values

    foreign_columns: dict[str, np.ndarray] = {}
    for entry in section.foreign:
        col = filled.column(entry.instrument_id)
        if entry.kind == "premium":
            foreign_columns[entry.instrument_id] = col
        else:
            foreign_columns[entry.instrument_id] = col - rf_values

    sector_columns: dict[str, np.ndarray] = {}
    failures: list[SectorFailure] = []
    for entry in section.sectors:
        try:
            series = log_returns(read_prices(entry, "sector"))
            lookup = dict(zip(series.dates, series.values))
            values = np.empty(len(axis))
            for i, day in enumerate(axis):
                if day not in lookup:
                    raise DataError(
                        f"{entry.instrument_id}: no observation on {day.isoformat()}"
                    )
                values[i] = lookup[day]
            sector_columns[entry.instrument_id] = values - rf_values
        except (DataError, OSError) as exc:
            failures.append(SectorFailure(entry.instrument_id, "ingest", str(exc)))

    columns = {MARKET: premium}
    columns.update(sector_columns)
    columns.update(foreign_columns)
    panel = AlignedPanel(axis, columns, base.policy)
    return panel, tuple(f.instrument_id for f in section.foreign), failures


def _axis_anchor(axis, values):
    from .data import ReturnSeries

    return ReturnSeries("_home_axis", axis, values)


def _synthetic_panel(config: StudyConfig) -> tuple[AlignedPanel, date]:
    from .synthlab import NoiseSpec, PanelSpec, simulate_panel

    section = config.synthetic
    assert section is not None
    spec = PanelSpec(
        n_days=section.n_days,
        n_sectors=len(section.sectors),
        betas=tuple(s.beta for s in section.sectors),
        alphas=tuple(s.alpha for s in section.sectors),
        event_index=section.event_index,
        shock=tuple(s.shock for s in section.sectors),
        beta_shift=tuple(s.beta_shift for s in section.sectors),
        noise=NoiseSpec(kind=section.noise, sigma=section.sigma, nu=section.nu),
        seed=section.seed,
    )
    raw, truth = simulate_panel(spec)
    columns = {MARKET: raw.column(truth.market_id)}
    for generated_id, entry in zip(truth.sector_ids, section.sectors):
        columns[entry.instrument_id] = raw.column(generated_id)
    panel = AlignedPanel(raw.dates, columns, "synthetic")
    return panel, raw.dates[section.event_index]


def _sector_pipeline(
    panel: AlignedPanel,
    layout: WindowLayout,
    config: StudyConfig,
    sector_id: str,
    foreign_ids: tuple[str, ...],
) -> SectorResult:
    model_cfg = config.model
    robust = model_cfg.robust_errors
    notes: list[str] = []

    model = fit_capm(panel, layout, sector_id, market_id=MARKET, robust=robust)
    ar = abnormal_returns(model, panel, layout)
    event_day_ar = ar.value_at(0)
    ar_test = ar_t_test(event_day_ar, ar.sigma2_estimation, ar.dof)
    cars = tuple(car(ar, w) for w in config.windows.event_half_widths)
    rank = corrado_test(model, panel, layout, event_day_offset=model_cfg.corrado_offset)
    conditional = conditional_prob_test(
        model, panel, layout, model_cfg.cp_half_width,
        reference_rate=model_cfg.cp_reference_rate,
    )

    dummy = build_dummy(layout, model_cfg.dummy_duration)
    risk = fit_event_risk(
        panel, layout, dummy, sector_id,
        market_id=MARKET, sample=model_cfg.fit_sample, robust=robust,
    )
    if risk.note:
        notes.append(risk.note)

    integration = None
    integration_ar = None
    integration_ar_test = None
    if foreign_ids:
        try:
            integration = fit_integration_model(
                panel, layout, dummy, sector_id, foreign_ids,
                market_id=MARKET, sample=model_cfg.fit_sample, robust=robust,
            )
            usable = _nonzero_factors(panel, layout, foreign_ids)
            model_int = fit_normal_model(
                panel, layout, sector_id, (MARKET, *usable), robust=robust
            )
            ar_int = abnormal_returns(model_int, panel, layout)
            integration_ar = ar_int.value_at(0)
            integration_ar_test = ar_t_test(
                integration_ar, ar_int.sigma2_estimation, ar_int.dof
            )
        except (DataError, EstimationError) as exc:
            integration = None
            integration_ar = None
            integration_ar_test = None
            notes.append(f"integration model failed: {exc}")

    diagnostics = _diagnostics(panel, layout, config, sector_id, model, risk, notes)
    return SectorResult(
        sector_id=sector_id,
        ar_series=ar,
        event_day_ar=event_day_ar,
        ar_test=ar_test,
        cars=cars,
        corrado=rank,
        conditional=conditional,
        risk=risk,
        integration=integration,
        integration_ar=integration_ar,
        integration_ar_test=integration_ar_test,
        diagnostics=diagnostics,
        notes=tuple(notes),
    )


def _nonzero_factors(panel, layout, foreign_ids):
    rows = np.asarray(layout.estimation_indices())
    return tuple(f for f in foreign_ids if not np.all(panel.column(f)[rows] == 0.0))


def _diagnostics(panel, layout, config, sector_id, model, risk, notes) -> dict[str, TestStat]:
    from .models import _fit_sample

    out: dict[str, TestStat] = {}
    rows = _fit_sample(layout, config.model.fit_sample)
    y = panel.column(sector_id)[rows]
    X = DesignMatrix.from_columns({"premium": panel.column(MARKET)[rows]}, intercept=True)
    break_pos = int(np.searchsorted(rows, layout.event_index))
    try:
        out["chow"] = chow_test(X, y, break_pos)
    except EstimationError as exc:
        notes.append(f"chow test skipped: {exc}")

    if not risk.saturated:
        k = len(risk.fit.names)
        R = np.zeros((2, k))
        R[0, risk.fit.names.index("premium_x_event")] = 1.0
        R[1, risk.fit.names.index("event")] = 1.0
        try:
            out["wald"] = wald_test(risk.fit, R, np.zeros(2))
        except EstimationError as exc:
            notes.append(f"wald test skipped: {exc}")
    else:
        notes.append("wald test skipped: event model saturated")

    residuals = model.fit.residuals
    try:
        out["arch_lm"] = arch_lm_test(residuals, config.model.arch_lm_lags)
    except EstimationError as exc:
        notes.append(f"arch-lm test skipped: {exc}")
    try:
        out["jarque_bera"] = jarque_bera(residuals)
    except EstimationError as exc:
        notes.append(f"jarque-bera test skipped: {exc}")
    return out


def run_study(config: StudyConfig, workers: int = 1) -> StudyReport:
    """Execute the full pipeline over every configured sector.

    Shared inputs are prepared once on one thread; sector pipelines then
    run independently (in parallel when ``workers`` exceeds one) on the
    same window layout. A failing sector contributes a failure record and
    does not abort the others.
    """
    notes: list[str] = []
    failures: list[SectorFailure] = []

    if config.synthetic is not None:
        panel, event_date = _synthetic_panel(config)
        foreign_ids: tuple[str, ...] = ()
        notes.append(
            f"synthetic panel: seed {config.synthetic.seed}, "
            f"noise {config.synthetic.noise}, sigma {config.synthetic.sigma}"
        )
    else:
        panel, foreign_ids, ingest_failures = _ingest_files(config, notes)
        failures.extend(ingest_failures)
        assert config.event_date is not None
        event_date = config.event_date

    spec = EventSpec(
        event_date=event_date,
        estimation_length=config.windows.estimation_length,
        pre_event_gap=config.windows.pre_event_gap,
        event_half_widths=config.windows.event_half_widths,
        post_event_length=config.windows.post_event_length,
        max_estimation_length=config.windows.max_estimation_length,
    )
    layout = build_layout(panel.dates, spec)

    available = [s for s in config.sector_ids() if s in panel.columns]
    results: dict[str, SectorResult] = {}

    def run_sector(sector_id: str) -> None:
        try:
            results[sector_id] = _sector_pipeline(panel, layout, config, sector_id, foreign_ids)
        except (DataError, EstimationError, WindowError) as exc:
            failures.append(SectorFailure(sector_id, "pipeline", str(exc)))

    if workers > 1 and len(available) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run_sector, available))
    else:
        for sector_id in available:
            run_sector(sector_id)

    ordered = tuple(results[s] for s in config.sector_ids() if s in results)
    failures.sort(key=lambda f: (f.sector_id, f.stage))
    dummy_doc = (
        "single-day dummy follows the announcement-day definition; "
        "through-post-window makes the post-event beta estimable"
    )
    notes.append(f"dummy duration: {config.model.dummy_duration} ({dummy_doc})")
    notes.append(
        "CAR t statistics use the estimation-window residual variance times "
        "window length (independence assumption)"
    )
    notes.append(
        "conditional probability is an empirical rolling-window exceedance "
        "rate; the construction is a reconstruction and its reference rate "
        f"is {config.model.cp_reference_rate}"
    )
    est_lo, est_hi = layout.estimation_range
    return StudyReport(
        schema_version=SCHEMA_VERSION,
        tool_version=__version__,
        config_hash=config.config_hash(),
        resolved_config=config.resolved(),
        axis_start=panel.dates[0],
        axis_end=panel.dates[-1],
        event_date=panel.dates[layout.event_index],
        event_index=layout.event_index,
        estimation_start=panel.dates[est_lo],
        estimation_end=panel.dates[est_hi],
        post_end=panel.dates[layout.post_range[1]],
        half_widths=config.windows.event_half_widths,
        sectors=ordered,
        failures=tuple(failures),
        notes=tuple(notes),
    )


# ---------------------------------------------------------------------------
# rendering


def _fmt2(value: float | None) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "n/a"
    return f"{value:.2f}"


def _pct(value: float | None, p_value: float | None = None) -> str:
    if value is None:
        return "n/a"
    text = f"{value * 100.0:.2f}"
    if p_value is not None and not math.isnan(p_value):
        text += stars(p_value)
    return text


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)


def _table_reactions(report: StudyReport) -> tuple[list[str], list[list[str]], list[str]]:
    header = ["Sector", "AR", "t-Stat"]
    for w in report.half_widths:
        header += [f"CAR{w}", "t-Stat"]
    rows = []
    for sector in report.sectors:
        row = [
            sector.sector_id,
            _pct(sector.event_day_ar, sector.ar_test.p_value),
            _fmt2(sector.ar_test.statistic),
        ]
        for result in sector.cars:
            row += [_pct(result.car, result.p_value), _fmt2(result.t_stat)]
        rows.append(row)
    return header, rows, [PERCENT_NOTE, STARS_NOTE]


def _table_robustness(report: StudyReport) -> tuple[list[str], list[list[str]], list[str]]:
    header = ["Sector", "t_Corrado", "CP", "t-Stat", "AR", "t-Stat"]
    rows = []
    for sector in report.sectors:
        corrado_cell = (
            "n/a" if sector.corrado.degenerate
            else f"{sector.corrado.statistic:.2f}{stars(sector.corrado.p_value)}"
        )
        if sector.integration_ar_test is None:
            ar_cell, t_cell = "n/a", "n/a"
        else:
            ar_cell = _pct(sector.integration_ar, sector.integration_ar_test.p_value)
            t_cell = _fmt2(sector.integration_ar_test.statistic)
        rows.append(
            [
                sector.sector_id,
                corrado_cell,
                _fmt2(sector.conditional.cp),
                f"{sector.conditional.t_stat:.2f}{stars(sector.conditional.p_value)}",
                ar_cell,
                t_cell,
            ]
        )
    notes = [
        "t_Corrado: event-day rank statistic over estimation plus widest event window.",
        "CP: share of historical rolling windows at least as extreme as the event CAR.",
        "AR: event-day abnormal return with foreign market premium controls, in percent.",
        STARS_NOTE,
    ]
    return header, rows, notes


def _table_risk(report: StudyReport) -> tuple[list[str], list[list[str]], list[str]]:
    header = ["Sector", "Beta pre-event", "Shift (beta2)", "Beta post-event"]
    rows = []
    saturated = False
    for sector in report.sectors:
        risk = sector.risk
        saturated = saturated or risk.saturated
        rows.append(
            [
                sector.sector_id,
                _fmt2(risk.beta_pre),
                _fmt2(risk.immediate_shift) + ("+" if risk.saturated else ""),
                _fmt2(risk.beta_post),
            ]
        )
    notes = [
        "Shift is the interaction coefficient; post-event beta equals "
        "pre-event beta plus shift by construction.",
    ]
    if saturated:
        notes.append("+ saturated single-day dummy: shift standard errors undefined.")
    return header, rows, notes


def _table_diagnostics(report: StudyReport) -> tuple[list[str], list[list[str]], list[str]]:
    header = [
        "Sector",
        "Chow F", "p",
        "Wald", "p",
        "ARCH-LM", "p",
        "Jarque-Bera", "p",
    ]
    rows = []
    for sector in report.sectors:
        row = [sector.sector_id]
        for key in ("chow", "wald", "arch_lm", "jarque_bera"):
            stat = sector.diagnostics.get(key)
            if stat is None:
                row += ["n/a", "n/a"]
            else:
                row += [_fmt2(stat.statistic), _fmt2(stat.p_value) + stars(stat.p_value)]
        rows.append(row)
    notes = [
        "Chow: structural break at the event day on the market model.",
        "Wald: joint test that both event-shift coefficients are zero.",
        "ARCH-LM and Jarque-Bera: estimation-window residual diagnostics.",
    ]
    return header, rows, notes


TABLES = {
    "sectoral_reactions": _table_reactions,
    "robustness": _table_robustness,
    "risk_change": _table_risk,
    "diagnostics": _table_diagnostics,
}


def _render_text(title: str, header, rows, notes) -> str:
    widths = [len(h) for h in header]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    sep = "  "
    lines = [title, "=" * len(title)]
    lines.append(sep.join(h.ljust(widths[i]) for i, h in enumerate(header)).rstrip())
    lines.append(sep.join("-" * w for w in widths))
    for row in rows:
        lines.append(sep.join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    if notes:
        lines.append("")
        lines.extend(f"Note: {note}" for note in notes)
    return "\n".join(lines) + "\n"


def _render_markdown(title: str, header, rows, notes) -> str:
    lines = [f"## {title}", ""]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "|".join([" --- "] * len(header)) + "|")
    for row in rows:
        lines.append("| " + " | ".join(row) + " |")
    if notes:
        lines.append("")
        lines.extend(f"*{note}*" for note in notes)
    return "\n".join(lines) + "\n"


def _csv_rows(report: StudyReport, table: str) -> tuple[list[str], list[list]]:
    if table == "sectoral_reactions":
        header = ["sector", "ar", "ar_t", "ar_p"]
        for w in report.half_widths:
            header += [f"car{w}", f"car{w}_t", f"car{w}_p"]
        rows = []
        for sector in report.sectors:
            row = [
                sector.sector_id,
                repr(sector.event_day_ar),
                repr(sector.ar_test.statistic),
                repr(sector.ar_test.p_value),
            ]
            for result in sector.cars:
                row += [repr(result.car), repr(result.t_stat), repr(result.p_value)]
            rows.append(row)
        return header, rows
    if table == "robustness":
        header = [
            "sector", "corrado_stat", "corrado_p", "cp", "cp_t", "cp_p",
            "integration_ar", "integration_ar_t", "integration_ar_p",
        ]
        rows = []
        for sector in report.sectors:
            test = sector.integration_ar_test
            rows.append(
                [
                    sector.sector_id,
                    repr(sector.corrado.statistic),
                    repr(sector.corrado.p_value),
                    repr(sector.conditional.cp),
                    repr(sector.conditional.t_stat),
                    repr(sector.conditional.p_value),
                    "" if sector.integration_ar is None else repr(sector.integration_ar),
                    "" if test is None else repr(test.statistic),
                    "" if test is None else repr(test.p_value),
                ]
            )
        return header, rows
    if table == "risk_change":
        header = [
            "sector", "beta_pre", "se_beta_pre", "beta_shift", "se_beta_shift",
            "beta_post", "beta0", "beta3", "se_beta3", "saturated",
        ]
        rows = []
        for sector in report.sectors:
            risk = sector.risk
            rows.append(
                [
                    sector.sector_id,
                    repr(risk.beta_pre), repr(risk.se_beta1),
                    repr(risk.immediate_shift), repr(risk.se_beta2),
                    repr(risk.beta_post),
                    repr(risk.beta0),
                    repr(risk.beta3), repr(risk.se_beta3),
                    str(risk.saturated).lower(),
                ]
            )
        return header, rows
    if table == "diagnostics":
        header = ["sector"]
        for key in ("chow", "wald", "arch_lm", "jarque_bera"):
            header += [f"{key}_stat", f"{key}_p"]
        rows = []
        for sector in report.sectors:
            row = [sector.sector_id]
            for key in ("chow", "wald", "arch_lm", "jarque_bera"):
                stat = sector.diagnostics.get(key)
                row += ["", ""] if stat is None else [repr(stat.statistic), repr(stat.p_value)]
            rows.append(row)
        return header, rows
    raise ValueError(f"unknown table {table!r}")


def render_tables(report: StudyReport, fmt: str, out_dir) -> list[Path]:
    """Write one file per table in the requested format; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if fmt == "json":
        path = out_dir / "report.json"
        path.write_text(
            json.dumps(report_payload(report), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        return [path]
    for table, builder in TABLES.items():
        header, rows, notes = builder(report)
        if fmt == "text":
            title = table.replace("_", " ").title()
            path = out_dir / f"{table}.txt"
            path.write_text(_render_text(title, header, rows, notes), encoding="utf-8")
        elif fmt == "markdown":
            title = table.replace("_", " ").title()
            path = out_dir / f"{table}.md"
            path.write_text(_render_markdown(title, header, rows, notes), encoding="utf-8")
        elif fmt == "csv":
            path = out_dir / f"{table}.csv"
            csv_header, csv_body = _csv_rows(report, table)
            with open(path, "w", encoding="utf-8", newline="") as handle:
                writer = csv.writer(handle, lineterminator="\n")
                writer.writerow(csv_header)
                writer.writerows(csv_body)
        else:
            raise ValueError(f"unknown format {fmt!r}")
        written.append(path)
    return written


def emit_car_curves(report: StudyReport, out_dir) -> list[Path]:
    """Per-sector running CAR files; the final row matches the table CAR."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for sector in report.sectors:
        for w in report.half_widths:
            offsets, running = car_curve(sector.ar_series, w)
            path = out_dir / f"car_curve_{_safe_name(sector.sector_id)}_w{w}.csv"
            with open(path, "w", encoding="utf-8", newline="") as handle:
                writer = csv.writer(handle, lineterminator="\n")
                writer.writerow(["tau", "date", "car"])
                base = sector.ar_series.offsets.index(offsets[0])
                for i, tau in enumerate(offsets):
                    writer.writerow(
                        [tau, sector.ar_series.dates[base + i].isoformat(), repr(float(running[i]))]
                    )
            written.append(path)
    return written


def report_payload(report: StudyReport) -> dict:
    """Full-precision JSON payload for the whole report."""

    def test_dict(stat: TestStat | None):
        if stat is None:
            return None
        return {
            "statistic": stat.statistic,
            "p_value": stat.p_value,
            "dof": list(stat.dof) if isinstance(stat.dof, tuple) else stat.dof,
            "degenerate": stat.degenerate,
            "stars": stars(stat.p_value),
        }

    sectors = []
    for sector in report.sectors:
        curves = {}
        for w in report.half_widths:
            offsets, running = car_curve(sector.ar_series, w)
            curves[str(w)] = {"tau": list(offsets), "car": [float(v) for v in running]}
        risk = sector.risk
        integration = sector.integration
        sectors.append(
            {
                "sector": sector.sector_id,
                "event_day_ar": sector.event_day_ar,
                "ar_test": test_dict(sector.ar_test),
                "cars": [
                    {
                        "half_width": result.half_width,
                        "car": result.car,
                        "t_stat": result.t_stat,
                        "p_value": result.p_value,
                        "stars": stars(result.p_value),
                    }
                    for result in sector.cars
                ],
                "corrado": {
                    "statistic": sector.corrado.statistic,
                    "p_value": sector.corrado.p_value,
                    "degenerate": sector.corrado.degenerate,
                },
                "conditional_probability": {
                    "cp": sector.conditional.cp,
                    "t_stat": sector.conditional.t_stat,
                    "p_value": sector.conditional.p_value,
                    "n_windows": sector.conditional.n_windows,
                    "reference_rate": sector.conditional.reference_rate,
                },
                "risk": {
                    "beta_pre": risk.beta_pre,
                    "se_beta_pre": risk.se_beta1,
                    "beta_shift": risk.immediate_shift,
                    "se_beta_shift": _nan_none(risk.se_beta2),
                    "beta_post": risk.beta_post,
                    "beta0": risk.beta0,
                    "beta3": risk.beta3,
                    "se_beta3": _nan_none(risk.se_beta3),
                    "saturated": risk.saturated,
                },
                "integration": None
                if integration is None
                else {
                    "beta_shift": integration.event.immediate_shift,
                    "foreign_coefficients": integration.foreign_coefficients,
                    "foreign_std_errors": {
                        k: _nan_none(v) for k, v in integration.foreign_std_errors.items()
                    },
                    "dropped_factors": list(integration.dropped_factors),
                },
                "integration_ar": sector.integration_ar,
                "integration_ar_test": test_dict(sector.integration_ar_test),
                "diagnostics": {k: test_dict(v) for k, v in sector.diagnostics.items()},
                "car_curves": curves,
                "notes": list(sector.notes),
            }
        )
    return {
        "schema_version": report.schema_version,
        "tool_version": report.tool_version,
        "config_hash": report.config_hash,
        "resolved_config": report.resolved_config,
        "windows": {
            "axis_start": report.axis_start.isoformat(),
            "axis_end": report.axis_end.isoformat(),
            "event_date": report.event_date.isoformat(),
            "event_index": report.event_index,
            "estimation_start": report.estimation_start.isoformat(),
            "estimation_end": report.estimation_end.isoformat(),
            "post_end": report.post_end.isoformat(),
            "half_widths": list(report.half_widths),
        },
        "sectors": sectors,
        "failures": [
            {"sector": f.sector_id, "stage": f.stage, "message": f.message}
            for f in report.failures
        ],
        "notes": list(report.notes),
    }


def _nan_none(value: float):
    return None if isinstance(value, float) and math.isnan(value) else value


def write_report(
    report: StudyReport, out_dir, formats: tuple[str, ...], figures: bool = True
) -> list[Path]:
    """Render every requested format plus CAR curves and figures."""
    out_dir = Path(out_dir)
    written: list[Path] = []
    for fmt in formats:
        written.extend(render_tables(report, fmt, out_dir))
    written.extend(emit_car_curves(report, out_dir))
    if figures and report.sectors:
        from .figures import render_car_figures

        written.extend(render_car_figures(report, out_dir))
    return written
