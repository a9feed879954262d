"""Figure rendering for report paths.

Every command that writes a CSV report also renders a small matplotlib
figure next to it, so a run leaves both machine-readable and glanceable
artifacts behind.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .pointcloud import EMPTY_CLASS


def save_sweep_figure(path, xs, ys, xlabel, ylabel, title):
    fig, ax = plt.subplots(figsize=(5.0, 3.2), constrained_layout=True)
    ax.plot(xs, ys, marker="o", markersize=3.5, linewidth=1.2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_class_iou_figure(path, report, names, title):
    semantic = [(name, iou) for i, (name, iou) in enumerate(zip(names, report.per_class_iou))
                if i != EMPTY_CLASS]
    labels = [name for name, _ in semantic]
    values = [iou for _, iou in semantic]
    fig, ax = plt.subplots(figsize=(7.0, 3.4), constrained_layout=True)
    ax.bar(range(len(values)), values, color="#4878a8")
    ax.axhline(report.miou, color="#b04030", linewidth=1.0, linestyle="--",
               label=f"mIoU {report.miou:.2f}")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
    ax.set_ylabel("IoU (%)")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.savefig(path, dpi=130)
    plt.close(fig)
