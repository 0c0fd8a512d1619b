"""Matplotlib renderings written next to the delimited outputs.

Plain lon/lat scatter maps, CV scatterplots and chain traces; no map
projections or basemaps. All figures use the Agg backend with fixed sizes
so repeated runs produce identical files.
"""

from __future__ import annotations

import math
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_DPI = 120


def _save(fig, path: str) -> None:
    fig.savefig(path, dpi=_DPI, metadata={"Software": "aodcal"})
    plt.close(fig)


def surface_map(rows: list[tuple], value: str, title: str, path: str) -> None:
    """Scatter of one period's surface; ``value`` picks mean or sd column."""
    col = {"mean": 4, "sd": 5}[value]
    pts = [(r[1], r[2], r[col]) for r in rows if r[8] > 0 and not math.isnan(r[col])]
    fig, ax = plt.subplots(figsize=(7, 5))
    if pts:
        lon, lat, vals = zip(*pts)
        sc = ax.scatter(lon, lat, c=vals, s=30, cmap="viridis", marker="s")
        fig.colorbar(sc, ax=ax, label="PM2.5 (ug/m3)" if value == "mean" else "SD (ug/m3)")
    ax.set_xlabel("lon")
    ax.set_ylabel("lat")
    ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)


def seasonal_maps(rows: list[tuple], value: str, path: str) -> None:
    """One panel per season, shared color scale."""
    seasons = sorted({r[3] for r in rows})
    col = {"mean": 4, "sd": 5}[value]
    vals = [r[col] for r in rows if r[8] > 0 and not math.isnan(r[col])]
    fig, axes = plt.subplots(1, max(len(seasons), 1), figsize=(5 * max(len(seasons), 1), 4),
                             squeeze=False)
    vmin = min(vals) if vals else 0.0
    vmax = max(vals) if vals else 1.0
    sc = None
    for ax, season in zip(axes[0], seasons):
        pts = [(r[1], r[2], r[col]) for r in rows
               if r[3] == season and r[8] > 0 and not math.isnan(r[col])]
        if pts:
            lon, lat, v = zip(*pts)
            sc = ax.scatter(lon, lat, c=v, s=30, cmap="viridis", marker="s",
                            vmin=vmin, vmax=vmax)
        ax.set_title(season)
        ax.set_xlabel("lon")
        ax.set_ylabel("lat")
    if sc is not None:
        fig.colorbar(sc, ax=list(axes[0]), shrink=0.85)
    _save(fig, path)


def cv_scatter(rows: list[tuple], regions_of: dict[str, str], path: str) -> None:
    """Observed vs predicted panels per region plus a pooled panel."""
    by_region: dict[str, list[tuple[float, float]]] = {}
    pooled = []
    for rid, sid, date, fold, obs, mean, lo, hi in rows:
        region = regions_of.get(sid, "?")
        by_region.setdefault(region, []).append((mean, obs))
        pooled.append((mean, obs))
    names = sorted(by_region) + ["all"]
    by_region["all"] = pooled
    ncol = 3
    nrow = int(math.ceil(len(names) / ncol))
    fig, axes = plt.subplots(nrow, ncol, figsize=(4 * ncol, 3.6 * nrow),
                             squeeze=False)
    for ax in axes.ravel():
        ax.axis("off")
    for ax, name in zip(axes.ravel(), names):
        ax.axis("on")
        pts = np.array(by_region[name])
        ax.plot(pts[:, 0], pts[:, 1], ".", ms=3, alpha=0.6)
        span = [min(pts.min(), 0), pts.max()]
        ax.plot(span, span, "k--", lw=0.8)
        ax.set_title(name, fontsize=9)
        ax.set_xlabel("predicted")
        ax.set_ylabel("observed")
    fig.tight_layout()
    _save(fig, path)


def chain_trace(block_name: str, loglik_trace: np.ndarray, path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 3))
    ax.plot(np.arange(1, loglik_trace.shape[0] + 1), loglik_trace, lw=0.6)
    ax.set_xlabel("iteration")
    ax.set_ylabel("log-likelihood")
    ax.set_title(block_name)
    fig.tight_layout()
    _save(fig, path)


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path
