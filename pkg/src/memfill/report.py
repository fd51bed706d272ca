"""Report emission: JSON-lines records plus matplotlib figures.

Every CLI subcommand that produces a report writes machine-readable
JSONL and renders companion PNG figures next to it. JSONL writing is
deterministic; figures are for eyeballs, not for diffing.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .masks import MASK_BANDS  # noqa: E402


def write_jsonl(path, records) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def sim_report_records(report) -> list[dict]:
    records = [
        {"step": i + 1, "error": err} for i, err in enumerate(report.step_errors)
    ]
    records.append({"summary": report.summary_dict()})
    return records


def _new_axes(title, xlabel, ylabel):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_retrieval_curve(report, path) -> None:
    fig, ax = _new_axes("Memory retrieval error", "step", "mean ||readout - V||")
    steps = np.arange(1, len(report.step_errors) + 1)
    ax.plot(steps, report.step_errors, lw=1.5)
    _save(fig, path)


def plot_band_errors(band_stats: dict, path) -> None:
    fig, ax = _new_axes("Final retrieval error by mask band", "mask band", "mean error")
    labels = [b[2] for b in MASK_BANDS if b[2] in band_stats] + [
        k for k in band_stats if k not in {b[2] for b in MASK_BANDS}
    ]
    values = [band_stats[k]["mean_error"] for k in labels]
    ax.bar(labels, values, color="#2f6f8f")
    _save(fig, path)


def plot_coverage(fractions, path) -> None:
    fig, ax = _new_axes("Mask corrupted fraction", "mask index", "corrupted fraction")
    ax.scatter(np.arange(len(fractions)), fractions, s=14)
    for lo, hi, label in MASK_BANDS:
        ax.axhspan(lo, hi, alpha=0.08, color="#777777")
        ax.axhline(hi, color="#999999", lw=0.6)
    ax.set_ylim(0.0, 0.7)
    _save(fig, path)


def plot_loss_terms(term_means: dict, path) -> None:
    fig, ax = _new_axes("Loss terms", "term", "value")
    names = [k for k in term_means if k != "total"]
    ax.bar(names, [term_means[k] for k in names], color="#8f4f2f")
    _save(fig, path)


def plot_metrics_by_band(rows: list[dict], path) -> None:
    """rows: per-sample dicts with band, l1, psnr, ssim keys."""
    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.4))
    order = [b[2] for b in MASK_BANDS]
    bands = [b for b in order if any(r["band"] == b for r in rows)]
    bands += sorted({r["band"] for r in rows} - set(order))
    for ax, key in zip(axes, ("l1", "psnr", "ssim")):
        means = [np.mean([r[key] for r in rows if r["band"] == b]) for b in bands]
        ax.bar(bands, means, color="#3f7f4f")
        ax.set_title(key)
        ax.grid(True, alpha=0.3)
    _save(fig, path)


def plot_grad_errors(results: dict, tolerance: float, path) -> None:
    fig, ax = _new_axes("Gradient check", "loss", "max relative error")
    names = list(results)
    ax.bar(names, [results[k] for k in names], color="#4f2f8f")
    ax.axhline(tolerance, color="red", lw=1.0, label=f"tolerance {tolerance:g}")
    ax.set_yscale("log")
    ax.legend()
    _save(fig, path)


def plot_sample_montage(sample, completed, path) -> None:
    fig, axes = plt.subplots(1, 4, figsize=(11.0, 3.0))
    panels = [
        ("image", sample.image.transpose(1, 2, 0)),
        ("labels", sample.semantic.labels),
        ("mask", sample.mask),
        ("completed", completed.transpose(1, 2, 0)),
    ]
    for ax, (title, panel) in zip(axes, panels):
        if panel.ndim == 2:
            ax.imshow(panel, cmap="viridis" if title == "labels" else "gray")
        else:
            ax.imshow(np.clip(panel, 0.0, 1.0))
        ax.set_title(title)
        ax.axis("off")
    _save(fig, path)
