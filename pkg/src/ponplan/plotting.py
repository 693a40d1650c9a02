"""Bar charts of a sweep: TCO, Capex breakdown and Opex breakdown per threshold."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .sweep import SweepCell, SweepReport  # noqa: E402

_METADATA = {"Software": None}


def _capex_items(cell: SweepCell, report: SweepReport) -> dict[str, float]:
    costs = report.grid.base_instance.costs
    n = cell.report.unit_counts
    return {
        "CO housing": n.n_cos * float(costs.co_housing),
        "DO": n.n_dos * float(costs.do_unit),
        "AWG": n.n_awgs * float(costs.awg),
        "Splitter": n.n_splitters * float(costs.splitter_price(cell.ratio)),
        "RU/ONU": n.n_ru_onus * float(costs.ru_onu),
        "Fiber": float(cell.report.capex_infrastructure),
        "Installation": float(cell.report.capex_installation),
    }


def _opex_items(cell: SweepCell, _report: SweepReport) -> dict[str, float]:
    rep = cell.report
    return {
        "Energy": float(rep.opex_energy),
        "O&M": float(rep.opex_om),
        "Site rental": float(rep.opex_site_rental),
    }


def _tco_items(cell: SweepCell, _report: SweepReport) -> dict[str, float]:
    rep = cell.report
    return {"Capex": float(rep.capex_total), "Opex": float(rep.horizon_years * rep.opex_total)}


def _grouped_stacked(report: SweepReport, items, title: str, ylabel: str, path) -> Path:
    grid = report.grid
    thresholds, ratios = grid.delay_thresholds, sorted(grid.split_ratios)
    names: list[str] = []
    for c in report.cells:
        if c.report is not None:
            for k in items(c, report):
                if k not in names:
                    names.append(k)
    colors = plt.get_cmap("tab10").colors
    width = 0.8 / len(ratios)
    x = np.arange(len(thresholds))
    fig, ax = plt.subplots(figsize=(9, 4.8))
    peak = 0.0
    for k, ratio in enumerate(ratios):
        offset = x - 0.4 + width * (k + 0.5)
        bottom = np.zeros(len(thresholds))
        for m, name in enumerate(names):
            heights = np.array([
                items(c, report).get(name, 0.0) if (c := report.cell(t, ratio)).report is not None else 0.0
                for t in thresholds
            ])
            ax.bar(offset, heights, width * 0.92, bottom=bottom, color=colors[m % len(colors)],
                   edgecolor="black", linewidth=0.4, label=name if k == 0 else None)
            bottom += heights
        peak = max(peak, float(bottom.max(initial=0.0)))
        for xo, t, top in zip(offset, thresholds, bottom):
            cell = report.cell(t, ratio)
            if cell.report is not None:
                ax.text(xo, top, f"1:{ratio}", ha="center", va="bottom", fontsize=7)
            else:
                ax.text(xo, 0, f"1:{ratio} {cell.status.lower()}", ha="center", va="bottom",
                        fontsize=7, rotation=90)
    ax.set_xticks(x, [f"{t:g}" for t in thresholds])
    ax.set_xlabel("Delay threshold [us]")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.set_ylim(0, (peak or 1.0) * 1.1)
    ax.legend(fontsize=8, loc="upper left", bbox_to_anchor=(1.01, 1.0))
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120, metadata=_METADATA)
    plt.close(fig)
    return path


def plot_tco(report: SweepReport, path) -> Path:
    years = report.grid.horizon_years or report.grid.base_instance.params.horizon_years
    return _grouped_stacked(report, _tco_items, "TCO vs delay threshold", f"Cost over {years} years [$]", path)


def plot_capex(report: SweepReport, path) -> Path:
    return _grouped_stacked(report, _capex_items, "Capex breakdown vs delay threshold", "Capex [$]", path)


def plot_opex(report: SweepReport, path) -> Path:
    return _grouped_stacked(report, _opex_items, "Opex breakdown vs delay threshold", "Opex per year [$]", path)


def write_figures(report: SweepReport, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return [
        plot_tco(report, out / "tco_vs_delay.png"),
        plot_capex(report, out / "capex_breakdown.png"),
        plot_opex(report, out / "opex_breakdown.png"),
    ]
