"""Figures for bound reports and benchmark histograms (Agg backend, PNG output)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed metadata keeps repeated runs byte-identical
_PNG_META = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)
    return path


def plot_bounds(sweep, path) -> Path:
    """Observed value and performance gaps per stage against ``alpha_t`` and ``2 alpha_t``."""
    rep = sweep.report
    stages = list(range(len(rep.alpha)))
    alpha = [float(a) for a in rep.alpha]
    fig, ax = plt.subplots(figsize=(6, 3.6))
    ax.plot(stages, alpha, "k-", marker="o", label=r"$\alpha_t$")
    ax.plot(stages, [2 * a for a in alpha], "k--", marker="o", label=r"$2\alpha_t$")
    ax.plot(stages, [float(g) for g in sweep.gap_V], "C0", marker="s", label="max |V - V^|")
    ax.plot(stages, [float(g) for g in sweep.gap_Lambda], "C3", marker="^", label="max |V - Lambda|")
    ax.set_xlabel("stage")
    ax.set_ylabel("cost")
    ax.set_xticks(stages)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_histogram(hist, path) -> Path:
    """Bar chart of ``(cost difference, frequency)`` pairs."""
    fig, ax = plt.subplots(figsize=(6, 3.6))
    if hist:
        xs = [float(d) for d, _ in hist]
        ns = [n for _, n in hist]
        span = max(xs) - min(xs)
        ax.bar(xs, ns, width=max(span / 60, 0.02), color="C0")
    ax.set_xlabel("approximate minus optimal realized cost")
    ax.set_ylabel("frequency")
    ax.grid(alpha=0.3, axis="y")
    return _save(fig, path)
