"""Figure rendering for evaluation reports and training logs.

Every report-producing CLI path drops PNG figures next to its JSON/CSV
output; these helpers keep the styling in one place.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import ComplementarityReport, OfflineReport, SimReport
from .policy import TrainingLog

DPI = 150


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def plot_offline_recall(report: OfflineReport, path: str | Path) -> Path:
    """Grouped recall bars per method with the upper bound drawn as a line."""
    methods = sorted(report.methods)
    n_values = list(report.n_values)
    width = 0.8 / len(n_values)
    fig, ax = plt.subplots(figsize=(7, 4))
    for j, n in enumerate(n_values):
        xs = [i + j * width for i in range(len(methods))]
        ys = [report.methods[name][f"recall_union@{n}"] for name in methods]
        ax.bar(xs, ys, width=width, label=f"Recall@{n}")
    for j, n in enumerate(n_values):
        ax.axhline(report.upper_bounds[n], linestyle="--", linewidth=1,
                   color=f"C{j}", alpha=0.7)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(methods))])
    ax.set_xticklabels(methods, rotation=20, ha="right")
    ax.set_ylabel("union recall")
    ax.set_ylim(0, 1.05)
    ax.legend()
    ax.set_title("Held-out recall by method (dashed: upper bound)")
    return _save(fig, path)


def plot_training_curves(log: TrainingLog, path: str | Path) -> Path:
    epochs = [rec["epoch"] for rec in log.epochs]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.2))
    ax1.plot(epochs, [rec.get("mean_reward", 0.0) for rec in log.epochs], marker="o")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("mean episode reward")
    ax2.plot(epochs, [rec.get("mean_loss", 0.0) for rec in log.epochs], marker="o", color="C1")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("mean loss")
    return _save(fig, path)


def plot_complementarity(report: ComplementarityReport, path: str | Path) -> Path:
    methods = sorted(report.methods)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.2))
    ax1.bar(methods, [report.methods[m]["diversity"] for m in methods], color="C0")
    ax1.set_ylabel("diversity")
    ax1.tick_params(axis="x", rotation=20)
    ax2.bar(methods, [report.methods[m]["overlap"] for m in methods], color="C3")
    ax2.set_ylabel("overlap with query")
    ax2.tick_params(axis="x", rotation=20)
    fig.suptitle(f"Token-level complementarity ({report.tokenizer})")
    return _save(fig, path)


def plot_online(report: SimReport, path: str | Path) -> Path:
    methods = sorted(report.methods)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.2))
    ctrs = [report.methods[m].ctr for m in methods]
    ax1.bar(methods, [v if v is not None else 0.0 for v in ctrs], color="C2")
    ax1.set_ylabel("CTR")
    ax1.tick_params(axis="x", rotation=20)
    ax2.bar(methods, [report.methods[m].tha for m in methods], color="C4")
    ax2.set_ylabel("THA")
    ax2.tick_params(axis="x", rotation=20)
    fig.suptitle(f"Simulated sessions ({report.sessions} per method, {report.click_model})")
    return _save(fig, path)
