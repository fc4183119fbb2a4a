"""Odor-map scatter and dendrogram SVG rendering."""

from __future__ import annotations

import logging
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import numpy as np
import pandas as pd

from odormap.clustering import Dendrogram
from odormap.core import ItemSet, OdorMapError, check_file
from odormap.embedding import EmbeddingResult
from odormap.svg import Circle, Element, Line, Path as SvgPath, Rect, Svg, Text, fmt_num

logger = logging.getLogger(__name__)

DEFAULT_COLOR = "#8c8c8c"
# alcohols / carboxylic acids / aromatics
FUNCTIONAL_GROUP_COLORS = {
    "alcohol": "#87ceeb",
    "carboxylic acid": "#f5d000",
    "aromatic": "#e03030",
}
ESSENTIAL_OIL_GROUP_COLORS = {
    "floral": "#8a2be2",
    "citrus": "#2e8b57",
    "woody": "#e03030",
}
FALLBACK_COLORS = ["#1f77b4", "#ff7f0e", "#9467bd", "#17becf", "#bcbd22", "#e377c2"]

_HEX = re.compile(r"^#(?:[0-9a-fA-F]{3}|[0-9a-fA-F]{6})$")

MAP_WIDTH = 900.0
MAP_HEIGHT = 700.0
MAP_PAD = 60.0
MARGIN_FRACTION = 0.05
FONT_SIZE = 11.0


@dataclass(frozen=True)
class GroupSpec:
    """Item label -> group, group -> color; unlisted items use the default."""

    groups: Mapping[str, str] = field(default_factory=dict)
    colors: Mapping[str, str] = field(default_factory=dict)
    default_color: str = DEFAULT_COLOR

    def __post_init__(self):
        for group, color in self.colors.items():
            if not _HEX.match(color):
                raise OdorMapError(f"group {group!r}: invalid color {color!r}")
        resolved = dict(self.colors)
        fallback = iter(FALLBACK_COLORS * (1 + len(self.group_names) // len(FALLBACK_COLORS)))
        for group in self.group_names:
            if group not in resolved:
                key = group.lower()
                resolved[group] = (
                    ESSENTIAL_OIL_GROUP_COLORS.get(key)
                    or FUNCTIONAL_GROUP_COLORS.get(key)
                    or next(fallback)
                )
        object.__setattr__(self, "colors", resolved)

    @property
    def group_names(self) -> list[str]:
        """Groups in order of first appearance."""
        return list(dict.fromkeys(self.groups.values()))

    def color_of(self, label: str) -> str:
        group = self.groups.get(label)
        return self.colors[group] if group is not None else self.default_color

    def check(self, items: ItemSet):
        unknown = [label for label in self.groups if label not in set(items.labels)]
        if unknown:
            raise OdorMapError(f"group spec names unknown items: {', '.join(unknown[:5])}")


def load_group_csv(path: str | os.PathLike) -> GroupSpec:
    """CSV with columns label, group and an optional color."""
    path = check_file(path)
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    frame.columns = [c.strip().lower() for c in frame.columns]
    if not {"label", "group"} <= set(frame.columns):
        raise OdorMapError(f"{path}: expected columns label, group[, color]")
    groups: dict[str, str] = {}
    colors: dict[str, str] = {}
    for row in frame.itertuples(index=False):
        label, group = row.label.strip(), row.group.strip()
        if label in groups:
            raise OdorMapError(f"{path}: label {label!r} listed twice")
        groups[label] = group
        color = getattr(row, "color", "").strip()
        if color:
            if colors.get(group, color) != color:
                raise OdorMapError(f"{path}: group {group!r} has two colors")
            colors[group] = color
    return GroupSpec(groups, colors)


def _extent(values: np.ndarray) -> tuple[float, float]:
    lo, hi = float(values.min()), float(values.max())
    span = hi - lo
    if span == 0.0:
        span = 1.0
    return lo - MARGIN_FRACTION * span, hi + MARGIN_FRACTION * span


def _legend(groups: GroupSpec, x: float, y: float) -> Element:
    legend = Element(class_="legend")
    for i, group in enumerate(groups.group_names):
        cy = y + i * (FONT_SIZE + 6)
        legend.add(Circle(x, cy, 5.0, fill=groups.colors[group]))
        legend.add(Text(group, x + 10, cy + 4, font_size=FONT_SIZE))
    return legend


def map_svg(e: EmbeddingResult, groups: Optional[GroupSpec] = None) -> str:
    if e.n_components != 2:
        raise OdorMapError(f"odor map needs a 2-D embedding, got k={e.n_components}")
    groups = groups or GroupSpec()
    groups.check(e.items)
    x_lo, x_hi = _extent(e.coords[:, 0])
    y_lo, y_hi = _extent(e.coords[:, 1])
    plot_w = MAP_WIDTH - 2 * MAP_PAD
    plot_h = MAP_HEIGHT - 2 * MAP_PAD

    def to_px(x: float, y: float) -> tuple[float, float]:
        return (
            MAP_PAD + (x - x_lo) / (x_hi - x_lo) * plot_w,
            MAP_PAD + (y_hi - y) / (y_hi - y_lo) * plot_h,
        )

    svg = Svg(MAP_WIDTH, MAP_HEIGHT)
    svg.add(Rect(0, 0, MAP_WIDTH, MAP_HEIGHT, fill="#ffffff"))
    svg.add(Rect(MAP_PAD, MAP_PAD, plot_w, plot_h, fill="none", stroke="#333333"))
    zx, zy = to_px(0.0, 0.0)
    if MAP_PAD <= zx <= MAP_PAD + plot_w:
        svg.add(Line(zx, MAP_PAD, zx, MAP_PAD + plot_h, stroke="#dddddd"))
    if MAP_PAD <= zy <= MAP_PAD + plot_h:
        svg.add(Line(MAP_PAD, zy, MAP_PAD + plot_w, zy, stroke="#dddddd"))
    svg.add(Text("MDS 1", MAP_WIDTH / 2, MAP_HEIGHT - MAP_PAD / 3, text_anchor="middle",
                 font_size=FONT_SIZE))
    svg.add(Text("MDS 2", MAP_PAD / 3, MAP_HEIGHT / 2, text_anchor="middle",
                 font_size=FONT_SIZE,
                 transform=f"rotate(-90 {fmt_num(MAP_PAD / 3)} {fmt_num(MAP_HEIGHT / 2)})"))

    points = Element(class_="points")
    labels = Element(class_="labels")
    # grouped items on top of the default-colored ones
    order = sorted(range(len(e.items)), key=lambda i: (e.items[i] in groups.groups, i))
    for i in order:
        label = e.items[i]
        px, py = to_px(e.coords[i, 0], e.coords[i, 1])
        color = groups.color_of(label)
        points.add(Circle(px, py, 4.0, fill=color, stroke="#333333", stroke_width=0.5))
        labels.add(Text(label, px + 5, py - 5, font_size=FONT_SIZE, fill="#222222"))
    svg.add(points)
    svg.add(labels)
    if groups.group_names:
        svg.add(_legend(groups, MAP_PAD + 10, MAP_PAD + 15))
    return svg.document()


def render_map(e: EmbeddingResult, groups: Optional[GroupSpec], out: str | os.PathLike):
    Path(out).write_text(map_svg(e, groups), encoding="utf-8", newline="\n")
    logger.info(f"wrote odor map {out}")


ROW_HEIGHT = 16.0
TREE_WIDTH = 480.0
CHAR_WIDTH = 6.5


def dendrogram_svg(
    dg: Dendrogram, labels: ItemSet, groups: Optional[GroupSpec] = None
) -> str:
    """Leaves top to bottom in left-before-right order, merge height growing
    to the right."""
    if len(labels) != dg.n_leaves:
        raise OdorMapError(
            f"{len(labels)} labels for a dendrogram with {dg.n_leaves} leaves"
        )
    groups = groups or GroupSpec()
    groups.check(labels)
    n = dg.n_leaves
    label_w = CHAR_WIDTH * max(len(label) for label in labels) + 20
    top = 30.0
    x0 = label_w
    height = top + n * ROW_HEIGHT + 50
    width = x0 + TREE_WIDTH + 40
    max_h = max((m.distance for m in dg.merges), default=0.0) or 1.0
    scale = TREE_WIDTH / max_h

    pos: dict[int, tuple[float, float]] = {}
    for row, leaf in enumerate(dg.leaf_order()):
        pos[leaf] = (x0, top + (row + 0.5) * ROW_HEIGHT)

    svg = Svg(width, height)
    svg.add(Rect(0, 0, width, height, fill="#ffffff"))
    leaves = Element(class_="leaves")
    for leaf in dg.leaf_order():
        _, y = pos[leaf]
        leaves.add(Text(labels[leaf], x0 - 6, y + 4, text_anchor="end",
                        font_size=FONT_SIZE, fill=groups.color_of(labels[leaf])))
    svg.add(leaves)

    brackets = Element(class_="merges")
    for i, m in enumerate(dg.merges):
        (lx, ly), (rx, ry) = pos[m.left], pos[m.right]
        x = x0 + m.distance * scale
        brackets.add(
            SvgPath(("M", lx, ly), ("H", x), ("V", ry), ("H", rx),
                    id=f"merge-{i}", class_="merge", fill="none", stroke="#333333")
        )
        pos[n + i] = (x, (ly + ry) / 2)
    svg.add(brackets)

    axis_y = top + n * ROW_HEIGHT + 10
    axis = Element(class_="axis")
    axis.add(Line(x0, axis_y, x0 + TREE_WIDTH, axis_y, stroke="#333333"))
    for t in np.linspace(0.0, max_h, 5):
        tx = x0 + t * scale
        axis.add(Line(tx, axis_y, tx, axis_y + 4, stroke="#333333"))
        axis.add(Text(f"{t:.3g}", tx, axis_y + 16, text_anchor="middle", font_size=FONT_SIZE - 2))
    svg.add(axis)
    return svg.document()


def render_dendrogram(
    dg: Dendrogram,
    labels: ItemSet,
    groups: Optional[GroupSpec],
    out: str | os.PathLike,
):
    Path(out).write_text(dendrogram_svg(dg, labels, groups), encoding="utf-8", newline="\n")
    logger.info(f"wrote dendrogram {out}")
