"""Benchmark summary figure: metric-vs-m panels rendered to SVG."""

from __future__ import annotations

from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_PANELS = (
    ("tpr", "tpr_sd", "Skeleton TPR"),
    ("fdr", "fdr_sd", "Skeleton FDR"),
    ("shd", "shd_sd", "SHD"),
    ("runtime_ms", "runtime_ms_sd", "Runtime (ms)"),
)


def benchmark_summary_svg(aggregates: list[dict],
                          path: Union[str, Path]) -> None:
    """Render mean-with-error-bar panels of TPR, FDR, SHD, and runtime
    against the variable count. ``aggregates`` holds one dict per m with
    the mean and sd fields named like the metrics CSV columns."""
    rows = sorted(aggregates, key=lambda r: r["m"])
    ms = [r["m"] for r in rows]
    with plt.rc_context({"svg.hashsalt": "ecdans"}):
        fig, axes = plt.subplots(2, 2, figsize=(9.0, 7.0))
        for ax, (key, sd_key, label) in zip(axes.flat, _PANELS):
            means = [r.get(key) for r in rows]
            sds = [r.get(sd_key) or 0.0 for r in rows]
            points = [(m, v, sd) for m, v, sd in zip(ms, means, sds)
                      if v is not None]
            if points:
                xs, ys, errs = zip(*points)
                ax.errorbar(xs, ys, yerr=errs, marker="o", capsize=3)
            ax.set_xlabel("variables (m)")
            ax.set_ylabel(label)
            ax.set_xticks(ms)
            ax.grid(True, alpha=0.3)
            if key in ("tpr", "fdr"):
                ax.set_ylim(-0.05, 1.05)
        fig.suptitle("Benchmark summary (mean over seeds, error bars = sd)")
        fig.tight_layout()
        fig.savefig(str(path), format="svg", metadata={"Date": None})
        plt.close(fig)
