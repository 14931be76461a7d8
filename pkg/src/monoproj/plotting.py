"""ECDF figures for simulation reports."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.2,
    "svg.hashsalt": "monoproj",
}

PANELS = (
    ("scaled_discrepancy", r"$r_n \max|\theta_n^* - \theta_n|$"),
    ("error_ratio", r"$\|\theta_n - \theta_0\| \,/\, \|\theta_n^* - \theta_0\|$"),
    ("width_ratio", "max width initial / max width corrected"),
)


def ecdf(values) -> tuple[np.ndarray, np.ndarray]:
    x = np.sort(np.asarray(values, dtype=float))
    return x, np.arange(1, x.size + 1) / x.size


def ecdf_rows(rows: list[dict], metrics=tuple(m for m, _ in PANELS)) -> list[dict]:
    out = []
    for n in sorted({r["n"] for r in rows}):
        sub = [r for r in rows if r["n"] == n]
        for m in metrics:
            x, f = ecdf([r[m] for r in sub])
            out.extend({"metric": m, "n": n, "value": float(a), "ecdf": float(b)} for a, b in zip(x, f))
    return out


def ecdf_figure(rows: list[dict], title: str = ""):
    sizes = sorted({r["n"] for r in rows})
    colors = plt.cm.viridis(np.linspace(0.0, 0.85, max(len(sizes), 1)))
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 3, figsize=(9.0, 2.8), constrained_layout=True)
        for ax, (metric, label) in zip(axes, PANELS):
            for n, c in zip(sizes, colors):
                x, f = ecdf([r[metric] for r in rows if r["n"] == n])
                ax.step(x, f, where="post", color=c, label=f"n = {n}")
            ax.set_xlabel(label)
            ax.set_ylim(0, 1.02)
        axes[0].set_ylabel("empirical CDF")
        axes[-1].legend(loc="lower right", frameon=False)
        if title:
            fig.suptitle(title)
    return fig


def figure_svg(fig) -> str:
    buf = io.StringIO()
    with plt.rc_context(STYLE):  # the hash salt must be active while saving
        fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()
