"""SVG figures of traced curves, annulus rasters, partitions and itineraries.

Every drawn element carries a stable gid so documents can be inspected
structurally:

    polyline-<layer>-<copy>   one deck translate of a curve
    cell-<layer>-<n>          one set raster cell
    fiber-<layer>-<i>         the cut fiber of lift index i
    steps-<layer>             an itinerary step plot
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import matplotlib
import numpy as np
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure
from matplotlib.patches import Rectangle

from .annuli import LiftedCurve, Raster, RectanglePartition
from .crooked import Itinerary
from .errors import EmptyLayer
from .maps import BlockSchedule

CANVAS = (1200, 600)
DPI = 100

STYLE = {
    "svg.hashsalt": "pseudocircle",
    "svg.fonttype": "path",
    "font.family": "DejaVu Sans",
    "font.size": 10,
    "axes.labelsize": 11,
    "axes.linewidth": 0.8,
    "xtick.labelsize": 9,
    "ytick.labelsize": 9,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "lines.linewidth": 0.8,
    "path.simplify": False,
}

PALETTE = ["#08589e", "#d95f0e", "#2b8cbe", "#31a354", "#756bb1", "#636363"]


@dataclass(frozen=True)
class Style:
    color: Optional[str] = None
    width: float = 0.8
    alpha: float = 1.0


@dataclass(frozen=True, eq=False)
class CurveLayer:
    curve: LiftedCurve
    label: str = ""
    style: Style = Style()


@dataclass(frozen=True, eq=False)
class RasterLayer:
    raster: Raster
    label: str = ""
    style: Style = Style(color="#9ecae1")


@dataclass(frozen=True, eq=False)
class PartitionLayer:
    part: RectanglePartition
    label: str = ""
    style: Style = Style(color="#636363", width=0.5)
    lifts: Optional[Sequence[int]] = None


@dataclass(frozen=True, eq=False)
class ItineraryLayer:
    itinerary: Itinerary
    label: str = ""
    style: Style = Style()


Layer = Union[CurveLayer, RasterLayer, PartitionLayer, ItineraryLayer]


@dataclass(frozen=True, eq=False)
class FigureSpec:
    layers: tuple
    viewport: tuple[float, float, float, float]
    unroll: int = 1
    canvas: tuple[int, int] = CANVAS
    equal_aspect: bool = False
    title: str = ""

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        x0, x1, y0, y1 = self.viewport
        if not (x1 > x0 and y1 > y0):
            raise ValueError("viewport must be nonempty")
        if self.unroll < 1:
            raise ValueError("unroll must be >= 1")


@dataclass(frozen=True)
class ViewportTransform:
    """Affine map from viewport coordinates to canvas pixels (y down)."""

    viewport: tuple[float, float, float, float]
    canvas: tuple[int, int] = CANVAS

    @property
    def scale(self) -> tuple[float, float]:
        x0, x1, y0, y1 = self.viewport
        w, h = self.canvas
        return w / (x1 - x0), h / (y1 - y0)

    def forward(self, x, y):
        x0, _, _, y1 = self.viewport
        sx, sy = self.scale
        return (np.asarray(x) - x0) * sx, (y1 - np.asarray(y)) * sy

    def inverse(self, u, v):
        x0, _, _, y1 = self.viewport
        sx, sy = self.scale
        return x0 + np.asarray(u) / sx, y1 - np.asarray(v) / sy


def _color(style: Style, i: int) -> str:
    return style.color or PALETTE[i % len(PALETTE)]


def _draw_curve(ax, li: int, layer: CurveLayer, unroll: int):
    c = layer.curve
    if len(c) == 0:
        raise EmptyLayer(f"layer {li}: curve has no vertices")
    col = _color(layer.style, li)
    for j in range(unroll):
        (line,) = ax.plot(c.x + j * c.holonomy, c.y, color=col,
                          lw=layer.style.width, alpha=layer.style.alpha,
                          label=layer.label if j == 0 and layer.label else None)
        line.set_gid(f"polyline-{li}-{j}")


def _draw_raster(ax, li: int, layer: RasterLayer):
    r = layer.raster
    if r.bits.size == 0:
        raise EmptyLayer(f"layer {li}: raster has no cells")
    dx, dy = r.cell_size()
    x0, _, y0, _ = r.box
    rows, cols = np.nonzero(r.bits)
    for n, (i, j) in enumerate(zip(rows, cols)):
        p = Rectangle((x0 + j * dx, y0 + i * dy), dx, dy, lw=0,
                      facecolor=layer.style.color, alpha=layer.style.alpha)
        p.set_gid(f"cell-{li}-{n}")
        ax.add_patch(p)


def _draw_partition(ax, li: int, layer: PartitionLayer):
    part = layer.part
    lifts = range(part.N) if layer.lifts is None else layer.lifts
    if len(lifts) == 0:
        raise EmptyLayer(f"layer {li}: no fibers selected")
    for i in lifts:
        fx, fy = part.fiber(i)
        (line,) = ax.plot(fx, fy, color=layer.style.color, lw=layer.style.width)
        line.set_gid(f"fiber-{li}-{i}")


def _draw_itinerary(ax, li: int, layer: ItineraryLayer):
    it = layer.itinerary
    if len(it) == 0:
        raise EmptyLayer(f"layer {li}: itinerary is empty")
    (line,) = ax.step(np.arange(len(it)), it.indices, where="post",
                      color=_color(layer.style, li), lw=layer.style.width)
    line.set_gid(f"steps-{li}")


def render_figure(spec: FigureSpec) -> str:
    """Render to an SVG document; output is byte-stable for a given spec."""
    plane = [(i, l) for i, l in enumerate(spec.layers) if not isinstance(l, ItineraryLayer)]
    steps = [(i, l) for i, l in enumerate(spec.layers) if isinstance(l, ItineraryLayer)]
    if not spec.layers:
        raise EmptyLayer("figure has no layers")
    with matplotlib.rc_context(STYLE):
        w, h = spec.canvas
        fig = Figure(figsize=(w / DPI, h / DPI), dpi=DPI)
        FigureCanvasSVG(fig)
        if plane and steps:
            ax, ax_it = fig.subplots(2, 1, gridspec_kw={"height_ratios": [3, 1]})
        elif plane:
            ax, ax_it = fig.subplots(), None
        else:
            ax, ax_it = None, fig.subplots()
        if ax is not None:
            for i, layer in plane:
                if isinstance(layer, CurveLayer):
                    _draw_curve(ax, i, layer, spec.unroll)
                elif isinstance(layer, RasterLayer):
                    _draw_raster(ax, i, layer)
                else:
                    _draw_partition(ax, i, layer)
            x0, x1, y0, y1 = spec.viewport
            ax.set_xlim(x0, x1)
            ax.set_ylim(y0, y1)
            ax.set_xlabel("x (lift)")
            ax.set_ylabel("y")
            if spec.equal_aspect:
                ax.set_aspect("equal")
            if any(getattr(l, "label", "") for _, l in plane if isinstance(l, CurveLayer)):
                ax.legend(loc="upper right", frameon=False)
            if spec.title:
                ax.set_title(spec.title)
        if ax_it is not None:
            for i, layer in steps:
                _draw_itinerary(ax_it, i, layer)
            ax_it.set_xlabel("position")
            ax_it.set_ylabel("rectangle")
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def count_elements(svg: str, prefix: str) -> int:
    """Number of gid-tagged elements whose id starts with ``prefix``."""
    return svg.count(f'id="{prefix}')


def figure_filename(stem: str, sched: Optional[BlockSchedule], depth: int) -> str:
    tag = sched.digest() if sched is not None else "base"
    return f"{stem}_{tag}_d{depth}.svg"
