"""Aggregate experiment results into tables, a summary JSON and figures.

Works from the typed records of :func:`besi.experiment.load_results` (or
the list returned by ``run_experiment``). Emitted artifacts:

* ``emd_summary.csv`` — median/std/IQR of the earth-mover distance per
  solver and noise level;
* ``emd_vs_depth.csv`` — mean EMD per depth bin, solver and noise level;
* ``depth_error_bins.csv`` — banded absolute depth-error fractions;
* ``depth_regression.csv`` — OLS calibration line of estimated on true
  depth with 95% intervals;
* ``depth_scatter.csv`` — the raw (true, estimated) depth pairs;
* ``summary.json`` — all of the above in one nested object;
* ``*.png`` — rendered versions of the four table families.

Failed trials (status ``failed:*``) are excluded from every statistic and
reported only through the failure counts.
"""
from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .evaluation import depth_error_bins, depth_regression, summarize
from .exceptions import ConfigError


def _pyplot():
    """Import pyplot on demand with the non-interactive backend."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt

__all__ = ["build_summary", "write_report", "mean_emd_by_depth_bin"]

_DEF_BIN_WIDTH = 3.0


def _ok(record: Dict) -> bool:
    return not str(record["status"]).startswith("failed") and math.isfinite(
        record["emd_mm"]
    )


def _groups(records: Sequence[Dict]):
    """Records keyed by (solver, noise), sorted keys for deterministic output."""
    grouped = defaultdict(list)
    for r in records:
        grouped[(r["solver"], r["noise_percent"])].append(r)
    return dict(sorted(grouped.items()))


def mean_emd_by_depth_bin(
    records: Sequence[Dict], bin_width_mm: float = _DEF_BIN_WIDTH
) -> List[Dict]:
    """Mean EMD per depth bin for one group of records (already filtered)."""
    if bin_width_mm <= 0:
        raise ConfigError("bin width must be positive")
    depths = np.array([r["depth_true_mm"] for r in records])
    emds = np.array([r["emd_mm"] for r in records])
    n_bins = max(1, int(np.ceil(depths.max() / bin_width_mm - 1e-12)))
    rows = []
    for b in range(n_bins):
        lo, hi = b * bin_width_mm, (b + 1) * bin_width_mm
        mask = (depths >= lo) & (depths < hi) if b < n_bins - 1 else (depths >= lo)
        if not mask.any():
            continue
        rows.append(
            {
                "depth_lo_mm": lo,
                "depth_hi_mm": hi,
                "n": int(mask.sum()),
                "mean_emd_mm": float(emds[mask].mean()),
            }
        )
    return rows


def build_summary(records: Sequence[Dict], bin_width_mm: float = _DEF_BIN_WIDTH) -> Dict:
    """Nested summary object; keys are solver labels, then noise levels as strings."""
    if not records:
        raise ConfigError("no results to report")
    good = [r for r in records if _ok(r)]
    summary = {
        "n_records": len(records),
        "n_failed": len(records) - len(good),
        "solvers": sorted({r["solver"] for r in records}),
        "noise_percents": sorted({r["noise_percent"] for r in records}),
        "emd": {},
        "emd_vs_depth": {},
        "depth_error_bins": {},
        "regression": {},
    }
    for (solver, noise), group in _groups(good).items():
        key = repr(noise)
        emds = [r["emd_mm"] for r in group]
        stats = summarize(emds)
        summary["emd"].setdefault(solver, {})[key] = {
            "n": stats.n,
            "median": stats.median,
            "std": stats.std,
            "iqr": stats.iqr,
        }
        summary["emd_vs_depth"].setdefault(solver, {})[key] = mean_emd_by_depth_bin(
            group, bin_width_mm
        )
        truth = [r["depth_true_mm"] for r in group]
        recon = [r["depth_recon_mm"] for r in group]
        table = depth_error_bins(truth, recon)
        summary["depth_error_bins"].setdefault(solver, {})[key] = {
            lab: float(frac) for lab, _cnt, frac in table.as_rows()
        }
        reg = None
        if len(group) >= 3 and np.ptp(truth) > 0:
            fit = depth_regression(truth, recon)
            reg = {
                "n": fit.n,
                "slope": fit.slope,
                "slope_ci": list(fit.slope_ci),
                "intercept": fit.intercept,
                "intercept_ci": list(fit.intercept_ci),
                "r_value": fit.r_value,
            }
        summary["regression"].setdefault(solver, {})[key] = reg
    return summary


def _write_table(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


# ---------------------------------------------------------------------------
# figures


def _figure_emd_vs_depth(summary, path):
    plt = _pyplot()
    noises = summary["noise_percents"]
    fig, axes = plt.subplots(
        1, len(noises), figsize=(5.5 * len(noises), 4.0), squeeze=False, sharey=True
    )
    for ax, noise in zip(axes[0], noises):
        for solver in summary["solvers"]:
            rows = summary["emd_vs_depth"].get(solver, {}).get(repr(noise))
            if not rows:
                continue
            centers = [(r["depth_lo_mm"] + r["depth_hi_mm"]) / 2 for r in rows]
            ax.plot(centers, [r["mean_emd_mm"] for r in rows], marker="o", label=solver)
        ax.set_xlabel("true source depth [mm]")
        ax.set_title(f"noise {100 * noise:g}%")
        ax.grid(alpha=0.3)
    axes[0][0].set_ylabel("mean EMD [mm]")
    axes[0][0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def _figure_emd_distribution(records, summary, path):
    plt = _pyplot()
    noises = summary["noise_percents"]
    solvers = summary["solvers"]
    fig, axes = plt.subplots(
        1, len(noises), figsize=(1.2 + 1.1 * len(solvers) * len(noises), 4.2),
        squeeze=False, sharey=True,
    )
    by_group = _groups([r for r in records if _ok(r)])
    for ax, noise in zip(axes[0], noises):
        data = [
            [r["emd_mm"] for r in by_group.get((solver, noise), [])] or [np.nan]
            for solver in solvers
        ]
        ax.boxplot(data, tick_labels=solvers)
        ax.set_title(f"noise {100 * noise:g}%")
        ax.tick_params(axis="x", rotation=30)
        ax.grid(alpha=0.3, axis="y")
    axes[0][0].set_ylabel("EMD [mm]")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def _figure_depth_scatter(records, summary, path):
    plt = _pyplot()
    noises = summary["noise_percents"]
    solvers = summary["solvers"]
    by_group = _groups([r for r in records if _ok(r)])
    fig, axes = plt.subplots(
        len(noises), len(solvers),
        figsize=(2.6 * len(solvers), 2.8 * len(noises)),
        squeeze=False, sharex=True, sharey=True,
    )
    for i, noise in enumerate(noises):
        for j, solver in enumerate(solvers):
            ax = axes[i][j]
            group = by_group.get((solver, noise), [])
            t = np.array([r["depth_true_mm"] for r in group])
            e = np.array([r["depth_recon_mm"] for r in group])
            if t.size:
                ax.scatter(t, e, s=6, alpha=0.5)
                lim = max(t.max(), e.max() if e.size else 0.0) * 1.05
                ax.plot([0, lim], [0, lim], "k--", lw=0.8)
                reg = summary["regression"].get(solver, {}).get(repr(noise))
                if reg:
                    xs = np.array([t.min(), t.max()])
                    ax.plot(xs, reg["intercept"] + reg["slope"] * xs, "r-", lw=1.0)
            if i == 0:
                ax.set_title(solver, fontsize=9)
            if j == 0:
                ax.set_ylabel(f"noise {100 * noise:g}%\nrecon depth [mm]", fontsize=8)
            if i == len(noises) - 1:
                ax.set_xlabel("true depth [mm]", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def _figure_depth_error_bins(summary, path):
    plt = _pyplot()
    noises = summary["noise_percents"]
    solvers = summary["solvers"]
    fig, axes = plt.subplots(
        1, len(noises), figsize=(5.5 * len(noises), 4.0), squeeze=False, sharey=True
    )
    for ax, noise in zip(axes[0], noises):
        first = summary["depth_error_bins"].get(solvers[0], {}).get(repr(noise), {})
        bands = list(first.keys())
        x = np.arange(len(bands))
        width = 0.8 / max(len(solvers), 1)
        for j, solver in enumerate(solvers):
            fracs = summary["depth_error_bins"].get(solver, {}).get(repr(noise), {})
            ax.bar(
                x + (j - (len(solvers) - 1) / 2) * width,
                [fracs.get(b, 0.0) for b in bands],
                width=width,
                label=solver,
            )
        ax.set_xticks(x, bands)
        ax.set_xlabel("|depth error| band [mm]")
        ax.set_title(f"noise {100 * noise:g}%")
        ax.grid(alpha=0.3, axis="y")
    axes[0][0].set_ylabel("fraction of trials")
    axes[0][0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def write_report(
    records: Sequence[Dict],
    out_dir,
    bin_width_mm: float = _DEF_BIN_WIDTH,
    figures: bool = True,
) -> Dict[str, Path]:
    """Write every table, the summary JSON and (optionally) the figures.

    Returns a mapping from artifact name to the written path.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = build_summary(records, bin_width_mm)
    good = [r for r in records if _ok(r)]
    by_group = _groups(good)
    paths: Dict[str, Path] = {}

    rows = []
    for (solver, noise), group in by_group.items():
        stats = summarize([r["emd_mm"] for r in group])
        n_failed = sum(
            1
            for r in records
            if r["solver"] == solver and r["noise_percent"] == noise and not _ok(r)
        )
        rows.append(
            [solver, _fmt(noise), stats.n, n_failed]
            + [_fmt(v) for v in (stats.median, stats.std, stats.iqr)]
        )
    paths["emd_summary"] = out_dir / "emd_summary.csv"
    _write_table(
        paths["emd_summary"],
        ["solver", "noise_percent", "n", "n_failed", "median_emd_mm", "std_emd_mm", "iqr_emd_mm"],
        rows,
    )

    rows = []
    for (solver, noise), group in by_group.items():
        for r in mean_emd_by_depth_bin(group, bin_width_mm):
            rows.append(
                [solver, _fmt(noise), _fmt(r["depth_lo_mm"]), _fmt(r["depth_hi_mm"]),
                 r["n"], _fmt(r["mean_emd_mm"])]
            )
    paths["emd_vs_depth"] = out_dir / "emd_vs_depth.csv"
    _write_table(
        paths["emd_vs_depth"],
        ["solver", "noise_percent", "depth_lo_mm", "depth_hi_mm", "n", "mean_emd_mm"],
        rows,
    )

    rows = []
    for (solver, noise), group in by_group.items():
        table = depth_error_bins(
            [r["depth_true_mm"] for r in group], [r["depth_recon_mm"] for r in group]
        )
        for lab, cnt, frac in table.as_rows():
            rows.append([solver, _fmt(noise), lab, cnt, _fmt(frac)])
    paths["depth_error_bins"] = out_dir / "depth_error_bins.csv"
    _write_table(
        paths["depth_error_bins"],
        ["solver", "noise_percent", "band_mm", "count", "fraction"],
        rows,
    )

    rows = []
    for solver, per_noise in summary["regression"].items():
        for noise_key, reg in per_noise.items():
            if reg is None:
                continue
            rows.append(
                [solver, noise_key, reg["n"]]
                + [
                    _fmt(v)
                    for v in (
                        reg["slope"], reg["slope_ci"][0], reg["slope_ci"][1],
                        reg["intercept"], reg["intercept_ci"][0], reg["intercept_ci"][1],
                        reg["r_value"],
                    )
                ]
            )
    paths["depth_regression"] = out_dir / "depth_regression.csv"
    _write_table(
        paths["depth_regression"],
        ["solver", "noise_percent", "n", "slope", "slope_lo", "slope_hi",
         "intercept", "intercept_lo", "intercept_hi", "r_value"],
        rows,
    )

    rows = [
        [r["solver"], _fmt(r["noise_percent"]), r["trial_id"],
         _fmt(r["depth_true_mm"]), _fmt(r["depth_recon_mm"])]
        for r in good
    ]
    paths["depth_scatter"] = out_dir / "depth_scatter.csv"
    _write_table(
        paths["depth_scatter"],
        ["solver", "noise_percent", "trial_id", "depth_true_mm", "depth_recon_mm"],
        rows,
    )

    paths["summary"] = out_dir / "summary.json"
    paths["summary"].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")

    if figures:
        paths["fig_emd_vs_depth"] = out_dir / "emd_vs_depth.png"
        _figure_emd_vs_depth(summary, paths["fig_emd_vs_depth"])
        paths["fig_emd_distribution"] = out_dir / "emd_distribution.png"
        _figure_emd_distribution(records, summary, paths["fig_emd_distribution"])
        paths["fig_depth_scatter"] = out_dir / "depth_scatter.png"
        _figure_depth_scatter(records, summary, paths["fig_depth_scatter"])
        paths["fig_depth_error_bins"] = out_dir / "depth_error_bins.png"
        _figure_depth_error_bins(summary, paths["fig_depth_error_bins"])
    return paths
