"""Figure rendering for stats and evaluation reports.

Every report path writes PNG figures next to the JSON/text output.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .evaluation import CONDITIONS, MetricsReport, SUBSETS  # noqa: E402
from .manifest import StatsReport  # noqa: E402


def _bar_chart(dist: dict, title: str, path: str, top_n: int | None = None):
    items = list(dist.items())
    if top_n:
        items = items[:top_n]
    labels = [k for k, _ in items]
    values = [v for _, v in items]
    fig, ax = plt.subplots(figsize=(max(6, 0.45 * len(labels) + 2), 4))
    ax.bar(range(len(values)), values, color="#4878a8")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=8)
    ax.set_ylabel("clips")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_stats_figures(stats: StatsReport, out_dir) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    written = []
    charts = [
        ("key_distribution", stats.key, "Key distribution", None),
        ("tempo_distribution", stats.tempo, "Tempo distribution", None),
        ("energy_distribution", stats.energy, "Energy distribution", None),
        ("genre_distribution", stats.genre, "Genre distribution", None),
        ("top_instruments", stats.instruments, "Top instruments", 15),
        ("happiness_distribution", stats.happiness, "Happiness deciles", None),
        ("popularity_distribution", stats.popularity, "Popularity deciles", None),
    ]
    for name, dist, title, top_n in charts:
        if not dist:
            continue
        path = os.path.join(str(out_dir), f"{name}.png")
        _bar_chart(dist, title, path, top_n=top_n)
        written.append(path)
    return written


def render_metrics_figures(report: MetricsReport, out_dir) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    written = []
    subsets = [s for s in SUBSETS if any(sub == s for _, sub in report.cells)]
    if subsets:
        fig, ax = plt.subplots(figsize=(7, 4.5))
        x = range(len(CONDITIONS))
        for sub in subsets:
            ys = [report.cells.get((c, sub), {}).get("mean") for c in CONDITIONS]
            ax.plot(x, ys, marker="o", label=sub)
        ax.set_xticks(list(x))
        ax.set_xticklabels(CONDITIONS)
        ax.set_ylabel("mean chroma similarity")
        ax.set_title("Chroma similarity by conditioning scheme")
        ax.legend()
        fig.tight_layout()
        path = os.path.join(str(out_dir), "chroma_by_condition.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    if report.subset_kld:
        path = os.path.join(str(out_dir), "subset_kld.png")
        _bar_chart(report.subset_kld, "KLD (reference || generated)", path)
        written.append(path)
    return written
