"""Static figure rendering for study reports and simulation tables.

Figures are plot files written next to the delimited output; rendering is
deterministic (fixed style, pinned metadata) so repeated runs produce
identical bytes.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_SAVE_KWARGS = {"dpi": 150, "metadata": {"Software": "eventlab"}}


def render_car_figures(report, out_dir) -> list[Path]:
    """One cumulative-abnormal-return chart per configured window width."""
    from .inference import car_curve

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for w in report.half_widths:
        fig, ax = plt.subplots(figsize=(8, 5))
        for sector in report.sectors:
            offsets, running = car_curve(sector.ar_series, w)
            ax.plot(offsets, running * 100.0, marker="o", markersize=3, label=sector.sector_id)
        ax.axhline(0.0, color="black", linewidth=0.8)
        ax.axvline(0.0, color="grey", linestyle="--", linewidth=0.8)
        ax.set_xlabel("Trading days relative to event")
        ax.set_ylabel("Cumulative abnormal return (%)")
        ax.set_title(f"Cumulative abnormal returns, [-{w}, +{w}] window")
        ax.legend(loc="best", fontsize=9)
        ax.grid(alpha=0.3)
        fig.tight_layout()
        path = out_dir / f"car_curves_w{w}.png"
        fig.savefig(path, **_SAVE_KWARGS)
        plt.close(fig)
        written.append(path)
    return written


def render_rejection_figure(table, out_path) -> Path:
    """Grouped bars of rejection rates per statistic with Monte-Carlo errors."""
    specs = sorted({cell.spec for cell in table.cells})
    stats = []
    for cell in table.cells:
        if cell.statistic not in stats:
            stats.append(cell.statistic)
    fig, ax = plt.subplots(figsize=(max(6, 1.6 * len(stats)), 4.5))
    width = 0.8 / max(len(specs), 1)
    for k, spec in enumerate(specs):
        rates = [table.rate(spec, s) for s in stats]
        errors = [
            next(c.mc_std_error for c in table.cells if c.spec == spec and c.statistic == s)
            for s in stats
        ]
        positions = [i + k * width for i in range(len(stats))]
        ax.bar(positions, rates, width=width, yerr=errors, capsize=2, label=spec)
    alpha = table.cells[0].alpha if table.cells else 0.05
    ax.axhline(alpha, color="black", linestyle="--", linewidth=0.8, label=f"alpha = {alpha}")
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(stats))])
    ax.set_xticklabels(stats)
    ax.set_ylabel("Rejection rate")
    ax.set_title("Simulated rejection rates")
    ax.legend(fontsize=8)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, **_SAVE_KWARGS)
    plt.close(fig)
    return out_path
