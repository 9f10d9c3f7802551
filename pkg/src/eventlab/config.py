"""Study configuration: a single TOML file with nested sections.

A study reads either real delimited files (``[data]``) or a seeded
synthetic panel (``[synthetic]``), never both. Every default is
materialized into the resolved dictionary that is hashed and echoed into
the report, so two configurations hash alike exactly when every effective
field agrees.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .models import SAMPLE_FULL, SAMPLE_WINDOWS, SINGLE_DAY, THROUGH_POST

FORMATS = ("text", "csv", "json", "markdown")
RISK_FREE_KINDS = ("annualized_percent", "daily")
FOREIGN_KINDS = ("price", "premium")


class ConfigError(ValueError):
    """The study configuration is malformed or inconsistent."""


@dataclass(frozen=True)
class FileInput:
    """One delimited input file and its column overrides."""

    instrument_id: str
    path: str
    date_column: str | None = None
    value_column: str | None = None
    kind: str = "price"


@dataclass(frozen=True)
class DataSection:
    market: FileInput
    risk_free: FileInput
    sectors: tuple[FileInput, ...]
    foreign: tuple[FileInput, ...]
    date_format: str = "YYYY-MM-DD"
    date_column: str = "date"
    price_column: str = "price"
    rate_column: str = "rate"
    risk_free_kind: str = "annualized_percent"
    day_count: int = 252
    alignment_policy: str = "forward-fill-limited"


@dataclass(frozen=True)
class SyntheticSector:
    instrument_id: str
    beta: float = 1.0
    alpha: float = 0.0
    shock: float = 0.0
    beta_shift: float = 0.0


@dataclass(frozen=True)
class SyntheticSection:
    n_days: int
    event_index: int
    seed: int
    sectors: tuple[SyntheticSector, ...]
    noise: str = "gaussian"
    sigma: float = 0.01
    nu: float = 5.0


@dataclass(frozen=True)
class WindowSection:
    estimation_length: int | None = None
    pre_event_gap: int = 0
    event_half_widths: tuple[int, ...] = (2, 5, 10)
    post_event_length: int = 30
    max_estimation_length: int = 250


@dataclass(frozen=True)
class ModelSection:
    dummy_duration: str = THROUGH_POST
    fit_sample: str = SAMPLE_WINDOWS
    cp_half_width: int = 5
    cp_reference_rate: float = 0.05
    corrado_offset: int = 0
    arch_lm_lags: int = 5
    forward_fill_limit: int = 3
    robust_errors: bool = False


@dataclass(frozen=True)
class StudyConfig:
    name: str
    event_date: date | None
    output_dir: str
    formats: tuple[str, ...]
    windows: WindowSection
    model: ModelSection
    data: DataSection | None
    synthetic: SyntheticSection | None
    base_dir: Path = field(default_factory=Path)

    def resolve_path(self, raw: str) -> Path:
        p = Path(raw)
        return p if p.is_absolute() else self.base_dir / p

    def resolved(self) -> dict:
        """Every effective field, defaults included, as plain data."""
        out: dict = {
            "study": {
                "name": self.name,
                "event_date": self.event_date.isoformat() if self.event_date else None,
                "output_dir": self.output_dir,
                "formats": list(self.formats),
            },
            "windows": {
                "estimation_length": self.windows.estimation_length,
                "pre_event_gap": self.windows.pre_event_gap,
                "event_half_widths": list(self.windows.event_half_widths),
                "post_event_length": self.windows.post_event_length,
                "max_estimation_length": self.windows.max_estimation_length,
            },
            "model": {
                "dummy_duration": self.model.dummy_duration,
                "fit_sample": self.model.fit_sample,
                "cp_half_width": self.model.cp_half_width,
                "cp_reference_rate": self.model.cp_reference_rate,
                "corrado_offset": self.model.corrado_offset,
                "arch_lm_lags": self.model.arch_lm_lags,
                "forward_fill_limit": self.model.forward_fill_limit,
                "robust_errors": self.model.robust_errors,
            },
        }
        if self.data is not None:
            d = self.data
            out["data"] = {
                "date_format": d.date_format,
                "date_column": d.date_column,
                "price_column": d.price_column,
                "rate_column": d.rate_column,
                "risk_free_kind": d.risk_free_kind,
                "day_count": d.day_count,
                "alignment_policy": d.alignment_policy,
                "market": _file_dict(d.market),
                "risk_free": _file_dict(d.risk_free),
                "sectors": [_file_dict(s) for s in d.sectors],
                "foreign": [_file_dict(f) for f in d.foreign],
            }
        if self.synthetic is not None:
            s = self.synthetic
            out["synthetic"] = {
                "n_days": s.n_days,
                "event_index": s.event_index,
                "seed": s.seed,
                "noise": s.noise,
                "sigma": s.sigma,
                "nu": s.nu,
                "sectors": [
                    {
                        "id": sec.instrument_id,
                        "beta": sec.beta,
                        "alpha": sec.alpha,
                        "shock": sec.shock,
                        "beta_shift": sec.beta_shift,
                    }
                    for sec in s.sectors
                ],
            }
        return out

    def config_hash(self) -> str:
        canonical = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def sector_ids(self) -> tuple[str, ...]:
        if self.data is not None:
            return tuple(s.instrument_id for s in self.data.sectors)
        assert self.synthetic is not None
        return tuple(s.instrument_id for s in self.synthetic.sectors)


def _file_dict(f: FileInput) -> dict:
    return {
        "id": f.instrument_id,
        "path": f.path,
        "date_column": f.date_column,
        "value_column": f.value_column,
        "kind": f.kind,
    }


def _require(table: dict, key: str, section: str):
    if key not in table:
        raise ConfigError(f"missing required key {key!r} in [{section}]")
    return table[key]


def _parse_date(raw, where: str) -> date:
    if isinstance(raw, date):
        return raw
    if isinstance(raw, str):
        try:
            return date.fromisoformat(raw)
        except ValueError:
            raise ConfigError(f"{where}: cannot parse date {raw!r} (use YYYY-MM-DD)") from None
    raise ConfigError(f"{where}: expected a date, got {type(raw).__name__}")


def _parse_file(entry: dict, section: str, default_kind: str = "price") -> FileInput:
    if isinstance(entry, str):
        raise ConfigError(f"[{section}] entries need an id and a path, got a bare string")
    return FileInput(
        instrument_id=str(_require(entry, "id", section)),
        path=str(_require(entry, "path", section)),
        date_column=entry.get("date_column"),
        value_column=entry.get("value_column"),
        kind=str(entry.get("kind", default_kind)),
    )


def read_toml(path) -> dict:
    """Read a TOML file, mapping parse problems to :class:`ConfigError`."""
    path = Path(path)
    try:
        return tomllib.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"configuration file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from None


def load_config(path) -> StudyConfig:
    """Parse and validate a study configuration file.

    All structural problems raise :class:`ConfigError` before any data is
    read or any computation starts.
    """
    path = Path(path)
    return parse_config(read_toml(path), base_dir=path.parent)


def parse_config(raw: dict, base_dir: Path | None = None) -> StudyConfig:
    study = raw.get("study", {})
    name = str(study.get("name", "study"))
    output_dir = str(study.get("output_dir", "out"))
    formats = tuple(study.get("formats", list(FORMATS)))
    for fmt in formats:
        if fmt not in FORMATS:
            raise ConfigError(f"unknown output format {fmt!r}; expected one of {FORMATS}")
    if not formats:
        raise ConfigError("at least one output format is required")

    w = raw.get("windows", {})
    windows = WindowSection(
        estimation_length=w.get("estimation_length"),
        pre_event_gap=int(w.get("pre_event_gap", 0)),
        event_half_widths=tuple(int(x) for x in w.get("event_half_widths", [2, 5, 10])),
        post_event_length=int(w.get("post_event_length", 30)),
        max_estimation_length=int(w.get("max_estimation_length", 250)),
    )

    m = raw.get("model", {})
    model = ModelSection(
        dummy_duration=str(m.get("dummy_duration", THROUGH_POST)),
        fit_sample=str(m.get("fit_sample", SAMPLE_WINDOWS)),
        cp_half_width=int(m.get("cp_half_width", 5)),
        cp_reference_rate=float(m.get("cp_reference_rate", 0.05)),
        corrado_offset=int(m.get("corrado_offset", 0)),
        arch_lm_lags=int(m.get("arch_lm_lags", 5)),
        forward_fill_limit=int(m.get("forward_fill_limit", 3)),
        robust_errors=bool(m.get("robust_errors", False)),
    )
    if model.dummy_duration not in (SINGLE_DAY, THROUGH_POST):
        raise ConfigError(
            f"dummy_duration must be {SINGLE_DAY!r} or {THROUGH_POST!r}, "
            f"got {model.dummy_duration!r}"
        )
    if model.fit_sample not in (SAMPLE_WINDOWS, SAMPLE_FULL):
        raise ConfigError(
            f"fit_sample must be {SAMPLE_WINDOWS!r} or {SAMPLE_FULL!r}, "
            f"got {model.fit_sample!r}"
        )
    if model.cp_half_width not in windows.event_half_widths:
        raise ConfigError(
            f"cp_half_width {model.cp_half_width} is not one of the configured "
            f"event half-widths {list(windows.event_half_widths)}"
        )
    if not 0.0 < model.cp_reference_rate < 1.0:
        raise ConfigError("cp_reference_rate must lie strictly between 0 and 1")

    has_data = "data" in raw
    has_synth = "synthetic" in raw
    if has_data == has_synth:
        raise ConfigError("exactly one of [data] or [synthetic] must be present")

    data_section = None
    synth_section = None
    event_date: date | None = None

    if has_data:
        d = raw["data"]
        sectors = tuple(_parse_file(e, "data.sectors") for e in d.get("sectors", []))
        if not sectors:
            raise ConfigError("at least one [[data.sectors]] entry is required")
        ids = [s.instrument_id for s in sectors]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate sector ids: {ids}")
        market_raw = _require(d, "market", "data")
        rf_raw = _require(d, "risk_free", "data")
        if isinstance(market_raw, str):
            market_raw = {"id": "market", "path": market_raw}
        if isinstance(rf_raw, str):
            rf_raw = {"id": "risk_free", "path": rf_raw}
        data_section = DataSection(
            market=_parse_file(market_raw, "data"),
            risk_free=_parse_file(rf_raw, "data", default_kind="rate"),
            sectors=sectors,
            foreign=tuple(_parse_file(e, "data.foreign") for e in d.get("foreign", [])),
            date_format=str(d.get("date_format", "YYYY-MM-DD")),
            date_column=str(d.get("date_column", "date")),
            price_column=str(d.get("price_column", "price")),
            rate_column=str(d.get("rate_column", "rate")),
            risk_free_kind=str(d.get("risk_free_kind", "annualized_percent")),
            day_count=int(d.get("day_count", 252)),
            alignment_policy=str(d.get("alignment_policy", "forward-fill-limited")),
        )
        if data_section.risk_free_kind not in RISK_FREE_KINDS:
            raise ConfigError(
                f"risk_free_kind must be one of {RISK_FREE_KINDS}, "
                f"got {data_section.risk_free_kind!r}"
            )
        if data_section.alignment_policy not in ("forward-fill-limited", "intersection"):
            raise ConfigError(
                "alignment_policy must be 'forward-fill-limited' or 'intersection', "
                f"got {data_section.alignment_policy!r}"
            )
        for f in data_section.foreign:
            if f.kind not in FOREIGN_KINDS:
                raise ConfigError(
                    f"foreign input {f.instrument_id!r}: kind must be one of "
                    f"{FOREIGN_KINDS}, got {f.kind!r}"
                )
        event_date = _parse_date(_require(study, "event_date", "study"), "study.event_date")
    else:
        s = raw["synthetic"]
        sector_entries = s.get("sectors", [])
        if not sector_entries:
            raise ConfigError("at least one [[synthetic.sectors]] entry is required")
        synth_sectors = tuple(
            SyntheticSector(
                instrument_id=str(_require(e, "id", "synthetic.sectors")),
                beta=float(e.get("beta", 1.0)),
                alpha=float(e.get("alpha", 0.0)),
                shock=float(e.get("shock", 0.0)),
                beta_shift=float(e.get("beta_shift", 0.0)),
            )
            for e in sector_entries
        )
        ids = [x.instrument_id for x in synth_sectors]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate sector ids: {ids}")
        synth_section = SyntheticSection(
            n_days=int(_require(s, "n_days", "synthetic")),
            event_index=int(_require(s, "event_index", "synthetic")),
            seed=int(_require(s, "seed", "synthetic")),
            sectors=synth_sectors,
            noise=str(s.get("noise", "gaussian")),
            sigma=float(s.get("sigma", 0.01)),
            nu=float(s.get("nu", 5.0)),
        )
        if "event_date" in study:
            raise ConfigError("synthetic studies place the event by event_index, not event_date")

    return StudyConfig(
        name=name,
        event_date=event_date,
        output_dir=output_dir,
        formats=formats,
        windows=windows,
        model=model,
        data=data_section,
        synthetic=synth_section,
        base_dir=base_dir or Path(),
    )


def apply_overrides(
    config: StudyConfig,
    output_dir: str | None = None,
    formats: tuple[str, ...] | None = None,
    seed: int | None = None,
) -> StudyConfig:
    """Command-line overrides become config fields (and change the hash)."""
    from dataclasses import replace

    out = config
    if output_dir is not None:
        out = replace(out, output_dir=output_dir)
    if formats:
        for fmt in formats:
            if fmt not in FORMATS:
                raise ConfigError(f"unknown output format {fmt!r}")
        out = replace(out, formats=tuple(formats))
    if seed is not None:
        if out.synthetic is None:
            raise ConfigError("--seed applies to synthetic studies only")
        out = replace(out, synthetic=replace(out.synthetic, seed=seed))
    return out
