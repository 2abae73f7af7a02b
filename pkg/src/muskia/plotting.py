"""Bench figures: optimize time against program size, and the speedup-proxy CDF."""
from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.ticker import ScalarFormatter  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.4),
    "figure.dpi": 150,
    "savefig.bbox": "tight",
    "font.family": "serif",
    "font.size": 10,
    "axes.labelsize": 10,
    "axes.titlesize": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "lines.linewidth": 1.4,
    "lines.markersize": 4,
}


def optimize_time_scatter(programs: list, path: str | os.PathLike) -> None:
    """Median optimize time per program against its record count, log-log."""
    records = np.array([p["records"] for p in programs], dtype=float)
    micros = np.array([p["optimize_time_ns"] for p in programs], dtype=float) / 1e3
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.scatter(records, micros, s=10, alpha=0.7, color="#1f5f8b", edgecolors="none")
        if len(records) >= 2 and np.ptp(records) > 0:
            slope, icept = np.polyfit(np.log(records), np.log(micros), 1)
            xs = np.geomspace(records.min(), records.max(), 50)
            ax.plot(xs, np.exp(icept) * xs ** slope, color="#c0392b", lw=1,
                    label=f"fit: time ~ n^{slope:.2f}")
            ax.legend()
        ax.set_xscale("log")
        ax.set_yscale("log")
        for axis in (ax.xaxis, ax.yaxis):
            axis.set_major_formatter(ScalarFormatter())
        ax.set_xlabel("records")
        ax.set_ylabel("optimize time, median (µs)")
        fig.savefig(path)
        plt.close(fig)


def speedup_cdf(programs: list, path: str | os.PathLike) -> None:
    """Empirical CDF of the per-program speedup proxy."""
    s = np.sort(np.array([p["speedup_proxy"] for p in programs], dtype=float))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        if s.size:
            y = np.arange(1, s.size + 1) / s.size
            ax.step(s, y, where="post", color="#1f5f8b")
            gm = float(np.exp(np.mean(np.log(s))))
            ax.axvline(gm, color="#c0392b", ls="--", lw=1, label=f"geomean {gm:.3f}")
            ax.legend(loc="lower right")
        ax.axvline(1.0, color="0.5", lw=0.8)
        ax.set_xscale("log")
        ax.xaxis.set_major_formatter(ScalarFormatter())
        ax.set_xlabel("speedup proxy (est. pixel ops before / after)")
        ax.set_ylabel("fraction of programs")
        ax.set_ylim(0, 1.02)
        fig.savefig(path)
        plt.close(fig)


def write_bench_figures(report: dict, directory: str | os.PathLike) -> list:
    os.makedirs(directory, exist_ok=True)
    paths = [os.path.join(directory, "optimize_time.png"),
             os.path.join(directory, "speedup_cdf.png")]
    optimize_time_scatter(report["programs"], paths[0])
    speedup_cdf(report["programs"], paths[1])
    return paths
