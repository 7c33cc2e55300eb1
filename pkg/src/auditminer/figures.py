"""Render analysis outputs as figures next to the delimited files.

Kept apart from the analytics themselves: analysis computes, this module
draws. Uses the Agg backend so report runs work headless.
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib import colors, colormaps
from matplotlib.patches import Rectangle

from .analysis import CategoryStats

_CMAP = "Reds"
_NORM = colors.Normalize(vmin=0.0, vmax=10.0)


def _leaf_tiles(node: dict, x: float, y: float, w: float, h: float,
                depth: int = 0) -> list[tuple[dict, float, float, float, float]]:
    """Slice-and-dice layout: alternate split orientation per depth."""
    children = node.get("children") or []
    if not children:
        return [(node, x, y, w, h)]
    total = sum(c["frequency"] for c in children) or 1
    tiles = []
    offset = 0.0
    for child in children:
        share = child["frequency"] / total
        if depth % 2 == 0:
            tiles.extend(_leaf_tiles(child, x + offset * w, y, share * w, h, depth + 1))
            offset += share
        else:
            tiles.extend(_leaf_tiles(child, x, y + offset * h, w, share * h, depth + 1))
            offset += share
    return tiles


def render_treemap(treemap: dict, out_path: str | Path, label_top: int = 12) -> Path:
    """Draw the category treemap: tile area is frequency, color is severity."""
    out = Path(out_path)
    fig, ax = plt.subplots(figsize=(10, 6))
    cmap = colormaps[_CMAP]
    tiles = _leaf_tiles(treemap, 0.0, 0.0, 1.0, 1.0)
    by_size = sorted(tiles, key=lambda t: t[0]["frequency"], reverse=True)
    labeled = {id(t[0]) for t in by_size[:label_top]}
    for node, x, y, w, h in tiles:
        if w <= 0 or h <= 0:
            continue
        ax.add_patch(Rectangle(
            (x, y), w, h,
            facecolor=cmap(_NORM(node["severity"])),
            edgecolor="white", linewidth=0.8,
        ))
        if id(node) in labeled and w * h > 0.005:
            ax.text(x + w / 2, y + h / 2, f"{node['id']}\n({node['frequency']})",
                    ha="center", va="center", fontsize=7)
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_axis_off()
    ax.set_title("Vulnerability categories: area = frequency, color = mean CVSS")
    fig.colorbar(plt.cm.ScalarMappable(norm=_NORM, cmap=cmap), ax=ax,
                 label="mean CVSS", fraction=0.04)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def render_severity_frequency(stats: Sequence[CategoryStats], out_path: str | Path,
                              top_n: int = 20) -> Path:
    """Horizontal bars of the most frequent categories, colored by severity."""
    out = Path(out_path)
    top = sorted(stats, key=lambda s: s.frequency, reverse=True)[:top_n]
    fig, ax = plt.subplots(figsize=(8, max(3, 0.4 * len(top) + 1)))
    cmap = colormaps[_CMAP]
    labels = [s.cwe_id for s in top]
    ax.barh(
        range(len(top)),
        [s.frequency for s in top],
        color=[cmap(_NORM(s.mean_cvss)) for s in top],
        edgecolor="gray",
    )
    ax.set_yticks(range(len(top)), labels=labels, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("findings")
    ax.set_title("Category frequency (color = mean CVSS)")
    fig.colorbar(plt.cm.ScalarMappable(norm=_NORM, cmap=cmap), ax=ax,
                 label="mean CVSS", fraction=0.04)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def render_tool_f1(rows: Sequence[tuple[str, tuple[float, float, float]]],
                   out_path: str | Path) -> Path:
    """Bar chart of per-tool F1 scores from the benchmark metrics table."""
    out = Path(out_path)
    names = [name for name, _ in rows]
    f1s = [metrics[2] for _, metrics in rows]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.bar(range(len(rows)), f1s, color="#bb4444", edgecolor="gray")
    ax.set_xticks(range(len(rows)), labels=names, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("F1 (%)")
    ax.set_title("Detection tool F1 on the dataset")
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out
