"""Render the 2x2 epidemic-panel figure from a summary CSV.

The input is the per-(time, region) ensemble summary produced by the
`epigame simulate` / `epigame export-figure-data` commands: columns
``t, region`` followed by ``mean/lo/hi`` triples for the susceptible,
exposed and infected fractions and the lockdown control. Leading ``#``
comment lines (the run stamp) are skipped.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


EXPECTED_COLUMNS = ["t", "region",
                    "mean_S", "lo_S", "hi_S",
                    "mean_E", "lo_E", "hi_E",
                    "mean_I", "lo_I", "hi_I",
                    "mean_ell", "lo_ell", "hi_ell"]

PANELS = [("S", "Susceptible fraction"), ("E", "Exposed fraction"),
          ("I", "Infected fraction"), ("ell", "Lockdown policy")]


class SchemaError(ValueError):
    """Summary CSV does not match the expected column layout."""


@dataclass
class Summary:
    """Summary table pivoted to (time, region) grids per series."""

    times: np.ndarray                 # (T,)
    regions: list[int]
    series: dict                      # name -> {"mean"|"lo"|"hi": (T, R)}


def load_summary(path) -> Summary:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh)
                if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise SchemaError(f"{path}: empty summary file")
    header = [h.strip() for h in rows[0]]
    if header != EXPECTED_COLUMNS:
        missing = [c for c in EXPECTED_COLUMNS if c not in header]
        extra = [c for c in header if c not in EXPECTED_COLUMNS]
        raise SchemaError(
            f"{path}: unexpected columns; missing {missing or 'none'}, "
            f"unexpected {extra or 'none'} (expected {EXPECTED_COLUMNS})")
    body = rows[1:]
    if not body:
        raise SchemaError(f"{path}: no data rows")
    try:
        data = np.array([[float(v) for v in row] for row in body])
    except ValueError as exc:
        raise SchemaError(f"{path}: non-numeric cell: {exc}") from exc
    if data.shape[1] != len(EXPECTED_COLUMNS):
        raise SchemaError(f"{path}: ragged rows")
    times = np.unique(data[:, 0])
    regions = sorted(int(r) for r in np.unique(data[:, 1]))
    if data.shape[0] != times.size * len(regions):
        raise SchemaError(f"{path}: rows do not form a full (t, region) grid")
    series = {}
    for j, name in enumerate(["S", "E", "I", "ell"]):
        block = {}
        for k, stat in enumerate(["mean", "lo", "hi"]):
            grid = np.full((times.size, len(regions)), np.nan)
            col = 2 + 3 * j + k
            t_idx = np.searchsorted(times, data[:, 0])
            r_idx = np.searchsorted(regions, data[:, 1].astype(int))
            grid[t_idx, r_idx] = data[:, col]
            block[stat] = grid
        series[name] = block
    return Summary(times=times, regions=regions, series=series)


def render_panel(summary: Summary, out_path, title: str | None = None) -> None:
    """2x2 panel (susceptible, exposed, infected, lockdown) with per-region
    mean lines and shaded 95% bands; degenerate bands collapse to the line."""
    fig, axes = plt.subplots(2, 2, figsize=(10, 7), sharex=True)
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for ax, (name, label) in zip(axes.ravel(), PANELS):
        block = summary.series[name]
        for i, region in enumerate(summary.regions):
            color = colors[i % len(colors)]
            ax.fill_between(summary.times, block["lo"][:, i], block["hi"][:, i],
                            color=color, alpha=0.2, linewidth=0)
            ax.plot(summary.times, block["mean"][:, i], color=color,
                    label=f"region {region}")
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
    for ax in axes[1]:
        ax.set_xlabel("time (days)")
    axes[0, 0].legend(loc="best", fontsize="small")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
