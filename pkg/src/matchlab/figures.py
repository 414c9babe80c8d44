"""Figure rendering for the experiment reports.

Every experiment writes its delimited output first; these helpers render
the companion PNGs.  They are deliberately thin: no styling system, just
direct matplotlib calls with fixed sizes so reruns produce the same
figures.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.colors import ListedColormap

from .dyadic import DyadicRecord, MeanLawFit, RecursionFit
from .pricemap import PriceMapRun, color_ramp, wrapping_couples

__all__ = [
    "price_map_figure",
    "mean_growth_figure",
    "bench_figure",
    "dist_fit_figure",
    "dyadic_figure",
    "model_test_figure",
]


def price_map_figure(run: PriceMapRun, path) -> None:
    """Price field with the matched couples drawn on top.

    Girls are circles, boys squares, matched pairs joined by gray
    segments.  Couples whose geodesic wraps around the torus get no
    segment; the wife is marked with an X instead.
    """
    pmap = run.price_map
    fig, ax = plt.subplots(figsize=(7.2, 7.2))
    cmap = ListedColormap(color_ramp() / 255.0)
    im = ax.imshow(
        pmap.values,
        origin="lower",
        extent=(0.0, 1.0, 0.0, 1.0),
        cmap=cmap,
        vmin=pmap.min_value,
        vmax=pmap.max_value,
        interpolation="nearest",
    )
    g = run.girls.coords
    b = run.boys.coords[run.matching.permutation]
    wraps = wrapping_couples(run)
    for i in np.nonzero(~wraps)[0]:
        ax.plot([g[i, 0], b[i, 0]], [g[i, 1], b[i, 1]], color="0.55", lw=0.5, zorder=2)
    ms = max(1.5, 90.0 / np.sqrt(run.n))
    ax.plot(g[~wraps, 0], g[~wraps, 1], "o", ms=ms, mfc="white", mec="black", mew=0.4, zorder=3)
    ax.plot(
        run.boys.coords[:, 0], run.boys.coords[:, 1],
        "s", ms=ms, mfc="0.2", mec="white", mew=0.3, zorder=3,
    )
    if wraps.any():
        ax.plot(g[wraps, 0], g[wraps, 1], "x", ms=ms * 1.6, mec="red", mew=1.0, zorder=4)
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_xticks([])
    ax.set_yticks([])
    fig.colorbar(im, ax=ax, fraction=0.046, pad=0.02, label="price")
    ax.set_title(f"dual prices, n = {run.n}, cost = {run.matching.total_cost:.4f}")
    fig.savefig(Path(path), dpi=150, bbox_inches="tight")
    plt.close(fig)


def mean_growth_figure(sizes, means, sds, fit: MeanLawFit, path) -> None:
    sizes = np.asarray(sizes, float)
    means = np.asarray(means, float)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.errorbar(sizes, means, yerr=np.asarray(sds, float), fmt="o", ms=4, capsize=2, label="mean cost")
    grid = np.geomspace(sizes.min(), sizes.max(), 200)
    ax.plot(
        grid,
        fit.beta * np.log(grid + fit.alpha) + fit.gamma,
        "-",
        label=f"{fit.beta:.3f} log(n + {fit.alpha:.3f}) + {fit.gamma:.3f}",
    )
    ax.set_xscale("log", base=2)
    ax.set_xlabel("n")
    ax.set_ylabel("mean matching cost")
    ax.legend(frameon=False)
    fig.savefig(Path(path), dpi=150, bbox_inches="tight")
    plt.close(fig)


def bench_figure(costs: dict, path) -> None:
    """Overlaid cost histograms, one panel per sample kind."""
    kinds = sorted({kind for kind, _ in costs})
    fig, axes = plt.subplots(1, len(kinds), figsize=(5.4 * len(kinds), 3.8), squeeze=False)
    for ax, kind in zip(axes[0], kinds):
        for (k, algo), vals in sorted(costs.items()):
            if k != kind:
                continue
            ax.hist(vals, bins=40, histtype="step", label=algo)
        ax.set_title(f"{kind} samples")
        ax.set_xlabel("total cost")
        ax.legend(frameon=False, fontsize=8)
    axes[0][0].set_ylabel("replications")
    fig.savefig(Path(path), dpi=150, bbox_inches="tight")
    plt.close(fig)


def dist_fit_figure(entries: list, path) -> None:
    """PIT ecdf against the diagonal for each fitted size."""
    fig, ax = plt.subplots(figsize=(5.2, 5.2))
    for entry in entries:
        u = np.sort(np.asarray(entry["uniforms"]))
        ecdf = np.arange(1, u.size + 1) / u.size
        ax.plot(u, ecdf, lw=1.0, label=f"n={entry['n']}  ks={entry['ks']:.3f}")
    ax.plot([0, 1], [0, 1], "k--", lw=0.8)
    ax.set_xlabel("PIT value")
    ax.set_ylabel("empirical cdf")
    ax.legend(frameon=False, fontsize=8)
    fig.savefig(Path(path), dpi=150, bbox_inches="tight")
    plt.close(fig)


def dyadic_figure(records: list[DyadicRecord], fit: RecursionFit, path) -> None:
    """Merged cost against the fitted combination a*s1 - b*s2."""
    s1 = np.array([r.s1 for r in records])
    s2 = np.array([r.s2 for r in records])
    merged = np.array([r.merged for r in records])
    pred = fit.a * s1 - fit.b * s2
    fig, ax = plt.subplots(figsize=(5.2, 5.2))
    ax.plot(pred, merged, ".", ms=2, alpha=0.5)
    lo, hi = min(pred.min(), merged.min()), max(pred.max(), merged.max())
    ax.plot([lo, hi], [lo, hi], "k--", lw=0.8)
    ax.set_xlabel(f"{fit.a:.3f} s1 - {fit.b:.3f} s2")
    ax.set_ylabel("merged cost")
    ax.set_title(f"defect |4a-2b-1| = {fit.stationarity_defect:.3f}, sd = {fit.noise_sd:.3f}")
    fig.savefig(Path(path), dpi=150, bbox_inches="tight")
    plt.close(fig)


def model_test_figure(levels, data_ks, model_ks_columns, path) -> None:
    """Goodness-of-fit by level: data column plus simulated replicates."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for i, col in enumerate(model_ks_columns):
        ax.plot(levels, col, "o--", ms=3, alpha=0.6, label="model runs" if i == 0 else None)
    ax.plot(levels, data_ks, "ks-", ms=5, label="data")
    ax.set_xlabel("level")
    ax.set_ylabel("sqrt(n) Kolmogorov distance")
    ax.legend(frameon=False)
    fig.savefig(Path(path), dpi=150, bbox_inches="tight")
    plt.close(fig)
