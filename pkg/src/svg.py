"""Static SVG figures of caustics and region graphs."""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from html import escape
from pathlib import Path

from src.models import Caustic, Point, RegionGraph

PREAMBLE = """\
<?xml version="1.0" standalone="no"?>
<svg width="{width:.2f}" height="{height:.2f}" viewBox="0 0 {width:.2f} {height:.2f}" version="1.1" xmlns="http://www.w3.org/2000/svg">
<rect x="0" y="0" width="{width:.2f}" height="{height:.2f}" style="fill:#ffffff"/>
"""

POSTAMBLE = "</svg>\n"

WALL_COLOURS = {"fold": "#000000", "bifurcation": "#1f5fa8", "twist_line": "#b03a2e", "cusp": "#000000"}


class SvgCanvas:
    """Accumulates primitives in data coordinates and fits them to the page on render."""

    def __init__(self, size: float = 800.0) -> None:
        self.size = size
        self.min_x: float | None = None
        self.max_x: float | None = None
        self.min_y: float | None = None
        self.max_y: float | None = None
        self.commands: list[tuple[str, tuple[Point, ...], dict[str, object]]] = []

    def require(self, x: float, y: float) -> None:
        if self.min_x is None or self.max_x is None or self.min_y is None or self.max_y is None:
            self.min_x = self.max_x = x
            self.min_y = self.max_y = y
            return
        self.min_x = min(self.min_x, x)
        self.max_x = max(self.max_x, x)
        self.min_y = min(self.min_y, y)
        self.max_y = max(self.max_y, y)

    def polyline(
        self, points: Sequence[Point], colour: str = "#000000", width: float = 1.0, dash: str | None = None
    ) -> None:
        for x, y in points:
            self.require(x, y)
        self.commands.append(("polyline", tuple(points), {"colour": colour, "width": width, "dash": dash}))

    def circle(self, centre: Point, radius_px: float = 3.0, colour: str = "#000000") -> None:
        self.require(*centre)
        self.commands.append(("circle", (centre,), {"colour": colour, "radius": radius_px}))

    def text(self, anchor: Point, text: str, colour: str = "#444444") -> None:
        self.require(*anchor)
        self.commands.append(("text", (anchor,), {"colour": colour, "text": text}))

    def _transform(self) -> tuple[float, float, float, float]:
        if self.min_x is None or self.max_x is None or self.min_y is None or self.max_y is None:
            return 1.0, 0.0, 0.0, self.size
        span = max(self.max_x - self.min_x, self.max_y - self.min_y) or 1.0
        pad = 0.05 * self.size
        scale = (self.size - 2.0 * pad) / span
        return scale, pad - scale * self.min_x, pad + scale * self.max_y, self.size

    def render(self) -> str:
        scale, shift_x, shift_y, size = self._transform()

        def page(point: Point) -> str:
            return f"{shift_x + scale * point[0]:.3f},{shift_y - scale * point[1]:.3f}"

        lines = [PREAMBLE.format(width=size, height=size)]
        for kind, points, style in self.commands:
            if kind == "polyline":
                dash = f";stroke-dasharray:{style['dash']}" if style["dash"] else ""
                lines.append(
                    f'<polyline points="{" ".join(page(p) for p in points)}" '
                    f'style="fill:none;stroke:{style["colour"]};stroke-width:{style["width"]}{dash}"/>\n'
                )
            elif kind == "circle":
                x, y = page(points[0]).split(",")
                lines.append(
                    f'<circle cx="{x}" cy="{y}" r="{style["radius"]}" style="fill:{style["colour"]}"/>\n'
                )
            else:
                x, y = page(points[0]).split(",")
                lines.append(
                    f'<text x="{x}" y="{y}" fill="{style["colour"]}" font-size="11" '
                    f'font-family="monospace">{escape(str(style["text"]))}</text>\n'
                )
        lines.append(POSTAMBLE)
        return "".join(lines)

    def save(self, path: Path) -> None:
        path.write_text(self.render(), encoding="utf-8")


def _closed(points: Sequence[Point]) -> tuple[Point, ...]:
    return (*points, points[0]) if points else ()


def draw_caustic(canvas: SvgCanvas, caustic: Caustic) -> None:
    if caustic.degenerate:
        canvas.circle(caustic.center, 4.0)
        canvas.text(caustic.center, " caustic point")
        return
    canvas.polyline(_closed(caustic.points), width=1.5)
    for cusp in caustic.cusps:
        canvas.circle(cusp.point, 4.0, "#b03a2e")
        canvas.text(cusp.point, f" c{cusp.id} s{cusp.pair[0]}s{cusp.pair[1]}")


def caustic_figure(caustic: Caustic) -> SvgCanvas:
    canvas = SvgCanvas()
    draw_caustic(canvas, caustic)
    return canvas


def graph_figure(graph: RegionGraph, caustic: Caustic | None = None, walls: Iterable[str] | None = None) -> SvgCanvas:
    """Caustic solid, walls thick, twist lines dashed, region ids at their representatives."""

    canvas = SvgCanvas()
    if caustic is not None:
        draw_caustic(canvas, caustic)
    chosen = set(walls) if walls is not None else None
    for wall in graph.all_walls:
        if chosen is not None and wall.id not in chosen:
            continue
        if wall.kind == "fold" and caustic is not None:
            continue
        colour = WALL_COLOURS.get(wall.kind, "#000000")
        if wall.kind == "twist_line":
            canvas.polyline(wall.polyline, colour, 1.5, dash="6,4")
        else:
            canvas.polyline(wall.polyline, colour, 2.5)
    for region in graph.regions:
        canvas.text(region.rep, f"R{region.id}" + ("*" if region.inside else ""))
    return canvas
