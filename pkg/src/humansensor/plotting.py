'''Box-plot figures for bucket sweeps, written straight to image files.'''

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .correlate import BucketSummary  # noqa: E402

RC = {
    "font.family": "sans-serif",
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    # keep output byte-stable across runs
    "svg.hashsalt": "humansensor",
}


# drop timestamps/version stamps so reruns are byte-identical
_STABLE_METADATA = {"png": {"Software": None}, "svg": {"Date": None}, "pdf": {"CreationDate": None, "Producer": None}}


def size(scale: float = 1.0) -> tuple[float, float]:
    width = 6.0 * scale
    return width, width * 0.6


def _bxp_stats(summaries: Sequence[BucketSummary]) -> list[dict]:
    out = []
    for s in summaries:
        if s.empty:
            continue
        out.append(
            {
                "label": str(s.k),
                "whislo": s.whisker_low,
                "q1": s.q1,
                "med": s.median,
                "q3": s.q3,
                "whishi": s.whisker_high,
                "fliers": list(s.outliers),
            }
        )
    return out


def bucket_figure(
    summaries: Sequence[BucketSummary],
    title: str = "",
    ylabel: str = "",
    limit: float | None = None,
    limit_label: str = "limit",
    xlabel: str = "minimum number of posts in the next 2 h",
):
    stats = _bxp_stats(summaries)
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=size())
        if stats:
            ax.bxp(stats, showfliers=True, flierprops={"marker": "o", "markerfacecolor": "none", "markersize": 3})
        else:
            ax.text(0.5, 0.5, "no readings in any bucket", ha="center", va="center", transform=ax.transAxes)
        if limit is not None:
            ax.axhline(limit, color="tab:red", linestyle="--", linewidth=0.8, label=f"{limit_label} {limit:g}")
            ax.legend(loc="best", frameon=False)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        fig.tight_layout()
    return fig


def save_bucket_figure(path: str | Path, summaries: Sequence[BucketSummary], **kwargs) -> Path:
    """Render a sweep and write it; the format follows the file suffix (png, svg, pdf)."""
    path = Path(path)
    fig = bucket_figure(summaries, **kwargs)
    try:
        with plt.rc_context(RC):
            fig.savefig(path, metadata=_STABLE_METADATA.get(path.suffix.lower().lstrip(".")))
    finally:
        plt.close(fig)
    return path
