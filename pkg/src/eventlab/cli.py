"""Command-line interface: run a study, validate a config, run simulations.

Exit codes: 0 success, 1 configuration error, 2 data error affecting every
sector, 3 partial success (some sectors failed). The default output
directory comes from ``--out``, then the config, then the ``EVENTLAB_OUT``
environment variable.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import FORMATS, ConfigError, apply_overrides, load_config, read_toml
from .data import DataError
from .report import StudyDataError, run_study, write_report
from .windows import WindowError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_PARTIAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eventlab",
        description="Event studies on daily price panels: abnormal returns, "
        "CAR windows, rank and probability tests, risk-shift regressions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a study and write report files")
    run_p.add_argument("config", help="path to the study configuration (TOML)")
    run_p.add_argument("--out", help="output directory (overrides config and EVENTLAB_OUT)")
    run_p.add_argument(
        "--format", action="append", choices=FORMATS, dest="formats",
        help="output format; repeat for several (overrides config)",
    )
    run_p.add_argument("--seed", type=int, help="seed override for synthetic mode")
    run_p.add_argument("--workers", type=int, default=1, help="sector pipelines in parallel")
    run_p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    run_p.add_argument("--verbose", action="store_true")
    run_p.set_defaults(func=_cmd_run)

    val_p = sub.add_parser("validate", help="check a configuration without running")
    val_p.add_argument("config")
    val_p.set_defaults(func=_cmd_validate)

    sim_p = sub.add_parser("simulate", help="run a Monte-Carlo size/power study")
    sim_p.add_argument("spec", help="path to the simulation specification (TOML)")
    sim_p.add_argument("--out", help="output directory")
    sim_p.add_argument("--workers", type=int, default=1)
    sim_p.add_argument("--verbose", action="store_true")
    sim_p.set_defaults(func=_cmd_simulate)
    return parser


def _resolve_out(cli_out: str | None, config_out: str | None) -> Path:
    if cli_out:
        return Path(cli_out)
    if config_out:
        return Path(config_out)
    return Path(os.environ.get("EVENTLAB_OUT", "out"))


def _cmd_run(args) -> int:
    config = load_config(args.config)
    config = apply_overrides(
        config,
        output_dir=args.out,
        formats=tuple(args.formats) if args.formats else None,
        seed=args.seed,
    )
    out_dir = _resolve_out(args.out, config.output_dir)
    if args.verbose:
        print(f"running study {config.name!r} -> {out_dir}", file=sys.stderr)

    report = run_study(config, workers=max(args.workers, 1))
    written = write_report(report, out_dir, config.formats, figures=not args.no_figures)
    print(f"wrote {len(written)} file(s) to {out_dir}")
    for failure in report.failures:
        print(f"sector {failure.sector_id} failed ({failure.stage}): {failure.message}",
              file=sys.stderr)
    if report.failures and not report.sectors:
        return EXIT_DATA
    if report.failures:
        return EXIT_PARTIAL
    return EXIT_OK


def _cmd_validate(args) -> int:
    config = load_config(args.config)
    missing = []
    if config.data is not None:
        entries = [config.data.market, config.data.risk_free,
                   *config.data.sectors, *config.data.foreign]
        for entry in entries:
            path = config.resolve_path(entry.path)
            if not path.is_file():
                missing.append(f"{entry.instrument_id}: {path}")
    if missing:
        for line in missing:
            print(f"missing input file: {line}", file=sys.stderr)
        return EXIT_CONFIG
    mode = "synthetic" if config.synthetic is not None else "file-based"
    print(f"configuration ok: {config.name!r} ({mode}, "
          f"{len(config.sector_ids())} sector(s), hash {config.config_hash()[:12]})")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    from .figures import render_rejection_figure
    from .synthlab import NoiseSpec, PanelSpec, size_power_study

    raw = read_toml(args.spec)
    sim = raw.get("simulation", {})
    panels = sim.get("panels", [])
    if not panels:
        raise ConfigError("at least one [[simulation.panels]] entry is required")

    specs = {}
    for i, entry in enumerate(panels):
        label = str(entry.get("label", f"panel_{i}"))
        if label in specs:
            raise ConfigError(f"duplicate panel label {label!r}")

        def listed(key, default):
            value = entry.get(key, default)
            return tuple(value) if isinstance(value, (list, tuple)) else (float(value),)

        betas = listed("betas", entry.get("beta", 1.0))
        try:
            specs[label] = PanelSpec(
                n_days=int(entry["n_days"]),
                n_sectors=len(betas),
                betas=betas,
                alphas=listed("alphas", entry.get("alpha", 0.0)),
                event_index=int(entry["event_index"]),
                shock=listed("shock", entry.get("shock", 0.0)),
                beta_shift=listed("beta_shift", entry.get("beta_shift", 0.0)),
                noise=NoiseSpec(
                    kind=str(entry.get("noise", "gaussian")),
                    sigma=float(entry.get("sigma", 0.01)),
                    nu=float(entry.get("nu", 5.0)),
                ),
                seed=int(entry["seed"]),
            )
        except KeyError as exc:
            raise ConfigError(f"panel {label!r}: missing key {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"panel {label!r}: {exc}") from None

    out_dir = _resolve_out(args.out, sim.get("output_dir"))
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.verbose:
        print(f"simulating {len(specs)} spec(s) -> {out_dir}", file=sys.stderr)

    table = size_power_study(
        specs,
        n_replications=int(sim.get("replications", 1000)),
        alpha=float(sim.get("alpha", 0.05)),
        event_half_widths=tuple(int(w) for w in sim.get("event_half_widths", [2, 5, 10])),
        cp_half_width=int(sim.get("cp_half_width", 5)),
        workers=max(args.workers, 1),
    )
    table.to_csv(out_dir / "rejection_rates.csv")
    table.to_json(out_dir / "rejection_rates.json")
    render_rejection_figure(table, out_dir / "rejection_rates.png")
    print(f"wrote rejection_rates.{{csv,json,png}} to {out_dir}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except WindowError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StudyDataError, DataError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
