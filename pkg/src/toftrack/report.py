"""File renderers for evaluation and benchmark reports.

Every report path writes machine-readable delimited output (CSV) and can
render a matplotlib figure next to it; figures always go to files (Agg
backend), never to a display.
"""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def write_counts_csv(path, eval_result: dict) -> None:
    """Per-frame predicted vs true counts from an evaluation result."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "predicted", "truth"])
        for f, p, t in zip(
            eval_result["eval_frames"], eval_result["predicted"], eval_result["truth"]
        ):
            w.writerow([f, p, t])


def save_counts_figure(path, eval_result: dict) -> None:
    frames = eval_result["eval_frames"]
    fig, ax = plt.subplots(figsize=(7, 3.2))
    ax.step(frames, eval_result["truth"], where="post", label="truth", lw=2, color="k")
    ax.step(frames, eval_result["predicted"], where="post", label="predicted", alpha=0.8)
    ax.set_xlabel("frame")
    ax.set_ylabel("object count")
    ax.set_title(
        f"MAE {eval_result['mae']:.3f}  RMSE {eval_result['rmse']:.3f}  "
        f"NRMSE {eval_result['nrmse']:.3f}"
    )
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_benchmark_csv(path, table: dict) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["objects", "mae", "rmse", "nrmse"])
        for n, row in table["objects"].items():
            w.writerow([n, row["mae"], row["rmse"], row["nrmse"]])


def save_benchmark_figure(path, table: dict) -> None:
    ns = list(table["objects"].keys())
    x = np.arange(len(ns))
    width = 0.27
    fig, ax = plt.subplots(figsize=(6, 3.2))
    for i, metric in enumerate(("mae", "rmse", "nrmse")):
        vals = [table["objects"][n][metric] for n in ns]
        ax.bar(x + (i - 1) * width, vals, width, label=metric.upper())
    ax.set_xticks(x, ns)
    ax.set_xlabel("objects in scene")
    ax.set_ylabel("count error")
    ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_bench_csv(path, stats: dict) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["stage", "median_ms", "p95_ms", "max_ms"])
        for stage, row in stats["stages"].items():
            w.writerow([stage, row["median_ms"], row["p95_ms"], row["max_ms"]])
        row = stats["end_to_end"]
        w.writerow(["end_to_end", row["median_ms"], row["p95_ms"], row["max_ms"]])


def save_bench_figure(path, stats: dict) -> None:
    stages = list(stats["stages"].keys())
    med = [stats["stages"][s]["median_ms"] for s in stages]
    p95 = [stats["stages"][s]["p95_ms"] for s in stages]
    y = np.arange(len(stages))
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.barh(y + 0.2, med, 0.4, label="median")
    ax.barh(y - 0.2, p95, 0.4, label="p95")
    ax.set_yticks(y, stages)
    ax.invert_yaxis()
    ax.set_xlabel("per-frame time (ms)")
    ax.set_title(f"end-to-end median {stats['end_to_end']['median_ms']:.1f} ms")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_heatmap_png(path, image: np.ndarray) -> None:
    """Colormapped rendering of a density heatmap (normalized per image)."""
    img = np.asarray(image, np.float64)
    peak = img.max()
    fig, ax = plt.subplots(figsize=(6, 6 * img.shape[0] / max(img.shape[1], 1)))
    ax.imshow(img / peak if peak > 0 else img, cmap="inferno", origin="upper")
    ax.set_axis_off()
    fig.tight_layout(pad=0)
    fig.savefig(path, dpi=120)
    plt.close(fig)
