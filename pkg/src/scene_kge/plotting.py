"""Figure rendering for projections, evaluation reports and training curves.

Everything is drawn with the Agg/SVG backends and written straight to files;
SVG output is made reproducible by pinning the hash salt and dropping the
creation date.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 7,
    "ytick.labelsize": 7,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "scene-kge",
    "svg.fonttype": "path",
}


def _save(fig, path) -> Path:
    path = Path(path)
    fmt = path.suffix.lstrip(".").lower() or "png"
    metadata = {"Date": None} if fmt == "svg" else ({"Software": None} if fmt == "png" else None)
    fig.savefig(path, format=fmt, metadata=metadata, bbox_inches="tight", dpi=150)
    plt.close(fig)
    return path


def plot_projection(projection, path, title: str | None = None) -> Path:
    """Scatter of a 2D projection, coloured by class label."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 5))
        groups: dict[str, list] = {}
        for label, x, y, cls in projection.points:
            groups.setdefault(cls or "(untyped)", []).append((x, y))
        cmap = plt.get_cmap("tab20")
        for i, (cls, pts) in enumerate(sorted(groups.items())):
            xs, ys = zip(*pts)
            ax.scatter(xs, ys, s=10, color=cmap(i % 20), label=cls, linewidths=0)
        ax.set_title(title or f"{projection.method} projection")
        ax.set_xticks([])
        ax.set_yticks([])
        if len(groups) <= 20:
            ax.legend(loc="center left", bbox_to_anchor=(1.0, 0.5), frameon=False, markerscale=1.5)
        return _save(fig, path)


def plot_report(report, path) -> Path:
    """Three bar panels: per-class categorization, per-class coherence, per-relation transitional distance."""
    panels = [
        ("Categorization", report.per_class_categorization, (-1, 1)),
        ("Coherence", report.per_class_coherence, (0, 1)),
        ("Semantic transitional distance", report.per_relation_transitional, (-1, 1)),
    ]
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 3, figsize=(13, 4))
        for ax, (title, values, ylim) in zip(axes, panels):
            ax.set_title(f"{title} ({report.metadata.get('algorithm', '')})")
            ax.set_ylim(*ylim)
            if not values:
                ax.text(0.5, 0.5, "unsupported", ha="center", va="center", transform=ax.transAxes)
                ax.set_xticks([])
                continue
            names = sorted(values)
            ax.bar(range(len(names)), [values[n] for n in names], color="0.35")
            ax.set_xticks(range(len(names)))
            ax.set_xticklabels(names, rotation=70, ha="right")
            ax.axhline(0.0, color="k", lw=0.5)
        fig.tight_layout()
        return _save(fig, path)


def plot_history(history, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        epochs = [e.epoch for e in history.epochs]
        ax.plot(epochs, history.mean_losses, color="k", lw=1, label="mean loss")
        ax.plot(epochs, history.violation_rates, color="0.5", lw=1, ls="--", label="violation rate")
        ax.set_xlabel("epoch")
        ax.legend(frameon=False)
        return _save(fig, path)
