"""Deployment maps as standalone SVG.

The SVG is written by hand with fixed number formatting, so identical
inputs give byte-identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

from .model import PlanningInstance, Site, SiteKind
from .plan import DeploymentPlan


class RenderError(ValueError):
    pass


@dataclass(frozen=True)
class RenderStyle:
    px_per_km: float = 60.0
    margin_px: float = 40.0
    legend_px: float = 170.0
    ru_color: str = "#1f4fd1"
    splitter_color: str = "#d62020"
    co_color: str = "#7b2d9e"
    feeder_color: str = "#f08a00"
    distribution_color: str = "#000000"
    closed_color: str = "#b0b0b0"
    marker_px: float = 5.0
    show_closed: bool = True
    title: str | None = None


def _f(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


class _Canvas:
    def __init__(self, sites: list[Site], style: RenderStyle):
        xs = [s.x for s in sites]
        ys = [s.y for s in sites]
        self.x0, self.x1 = min(xs), max(xs)
        self.y0, self.y1 = min(ys), max(ys)
        self.style = style
        self.plot_w = max(self.x1 - self.x0, 1e-9) * style.px_per_km
        self.plot_h = max(self.y1 - self.y0, 1e-9) * style.px_per_km
        self.width = self.plot_w + 2 * style.margin_px + style.legend_px
        self.height = self.plot_h + 2 * style.margin_px + 30

    def xy(self, site: Site) -> tuple[float, float]:
        s = self.style
        px = s.margin_px + (site.x - self.x0) * s.px_per_km
        py = s.margin_px + (self.y1 - site.y) * s.px_per_km  # north up
        return px, py


def _marker(kind: SiteKind, px: float, py: float, size: float, fill: str, stroke: str,
            css: str, site_id: str) -> str:
    title = f"<title>{escape(site_id)}</title>"
    if kind is SiteKind.RU_ONU:
        return (f'<circle class="{css}" cx="{_f(px)}" cy="{_f(py)}" r="{_f(size)}" '
                f'fill="{fill}" stroke="{stroke}">{title}</circle>')
    if kind is SiteKind.SPLITTER:
        return (f'<rect class="{css}" x="{_f(px - size)}" y="{_f(py - size)}" width="{_f(2 * size)}" '
                f'height="{_f(2 * size)}" fill="{fill}" stroke="{stroke}">{title}</rect>')
    h = size * 1.6
    pts = f"{_f(px)},{_f(py - h)} {_f(px + h)},{_f(py)} {_f(px)},{_f(py + h)} {_f(px - h)},{_f(py)}"
    return f'<polygon class="{css}" points="{pts}" fill="{fill}" stroke="{stroke}">{title}</polygon>'


def _nice_scale(km_span: float) -> float:
    target = max(km_span / 5, 1e-3)
    base = 10 ** math.floor(math.log10(target))
    for mult in (1, 2, 5, 10):
        if base * mult >= target:
            return base * mult
    return base * 10


def render_map(inst: PlanningInstance, plan: DeploymentPlan, style: RenderStyle | None = None) -> str:
    """SVG text of the plan drawn over the instance's sites."""
    style = style or RenderStyle()
    by_id = {s.id: s for s in (*inst.cos, *inst.splitters, *inst.rus)}
    referenced = set(plan.open_cos) | set(plan.open_splitters) | set(plan.ru_assignment) \
        | set(plan.ru_assignment.values()) | set(plan.splitter_homing) | set(plan.splitter_homing.values())
    unknown = sorted(referenced - by_id.keys())
    if unknown:
        raise RenderError("plan references sites missing from the instance: " + ", ".join(unknown))

    canvas = _Canvas(list(by_id.values()), style)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(canvas.width)}" height="{_f(canvas.height)}" '
        f'viewBox="0 0 {_f(canvas.width)} {_f(canvas.height)}">',
        f'<rect x="0" y="0" width="{_f(canvas.width)}" height="{_f(canvas.height)}" fill="#ffffff"/>',
    ]
    if style.title:
        out.append(f'<text x="{_f(style.margin_px)}" y="20" font-family="sans-serif" font-size="14">'
                   f'{escape(style.title)}</text>')

    open_ids = set(plan.open_cos) | set(plan.open_splitters)
    if style.show_closed:
        out.append('<g id="closed-sites">')
        for site in (*inst.cos, *inst.splitters):
            if site.id not in open_ids:
                px, py = canvas.xy(site)
                out.append(_marker(site.kind, px, py, style.marker_px * 0.6, "none", style.closed_color,
                                   f"site closed {site.kind.value}", site.id))
        out.append("</g>")

    out.append('<g id="feeder-links">')
    for sp_id, co_id in sorted(plan.splitter_homing.items()):
        a, b = canvas.xy(by_id[co_id]), canvas.xy(by_id[sp_id])
        if a == b:
            continue
        out.append(f'<line class="feeder" x1="{_f(a[0])}" y1="{_f(a[1])}" x2="{_f(b[0])}" y2="{_f(b[1])}" '
                   f'stroke="{style.feeder_color}" stroke-width="2" stroke-dasharray="6,4"/>')
    out.append("</g>")
    out.append('<g id="distribution-links">')
    for ru_id, sp_id in sorted(plan.ru_assignment.items()):
        a, b = canvas.xy(by_id[sp_id]), canvas.xy(by_id[ru_id])
        if a == b:
            continue
        out.append(f'<line class="distribution" x1="{_f(a[0])}" y1="{_f(a[1])}" x2="{_f(b[0])}" y2="{_f(b[1])}" '
                   f'stroke="{style.distribution_color}" stroke-width="1.2"/>')
    out.append("</g>")

    out.append('<g id="sites">')
    for site in inst.rus:
        px, py = canvas.xy(site)
        out.append(_marker(site.kind, px, py, style.marker_px * 0.8, style.ru_color, style.ru_color,
                           "site open ru_onu", site.id))
    for site in inst.splitters:
        if site.id in plan.open_splitters:
            px, py = canvas.xy(site)
            out.append(_marker(site.kind, px, py, style.marker_px, style.splitter_color, "#000000",
                               "site open splitter", site.id))
    for site in inst.cos:
        if site.id in plan.open_cos:
            px, py = canvas.xy(site)
            out.append(_marker(site.kind, px, py, style.marker_px, style.co_color, "#000000",
                               "site open central_office", site.id))
    out.append("</g>")

    out.extend(_legend(canvas, style))
    out.extend(_scale_bar(canvas, style))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _legend(canvas: _Canvas, style: RenderStyle) -> list[str]:
    x = canvas.width - style.legend_px + 10
    y = style.margin_px
    rows = [
        (_marker(SiteKind.RU_ONU, x + 6, y, style.marker_px * 0.8, style.ru_color, style.ru_color,
                 "legend", "RU/ONU"), "RU/ONU"),
        (_marker(SiteKind.SPLITTER, x + 6, y + 22, style.marker_px, style.splitter_color, "#000000",
                 "legend", "splitter"), "Splitter"),
        (_marker(SiteKind.CENTRAL_OFFICE, x + 6, y + 44, style.marker_px, style.co_color, "#000000",
                 "legend", "central office"), "Central office"),
        (f'<line class="legend" x1="{_f(x)}" y1="{_f(y + 66)}" x2="{_f(x + 14)}" y2="{_f(y + 66)}" '
         f'stroke="{style.feeder_color}" stroke-width="2" stroke-dasharray="6,4"/>', "Feeder fiber"),
        (f'<line class="legend" x1="{_f(x)}" y1="{_f(y + 88)}" x2="{_f(x + 14)}" y2="{_f(y + 88)}" '
         f'stroke="{style.distribution_color}" stroke-width="1.2"/>', "Distribution fiber"),
    ]
    out = ['<g id="legend">']
    for k, (shape, label) in enumerate(rows):
        out.append(shape)
        out.append(f'<text x="{_f(x + 22)}" y="{_f(y + 22 * k + 4)}" font-family="sans-serif" '
                   f'font-size="11">{label}</text>')
    out.append("</g>")
    return out


def _scale_bar(canvas: _Canvas, style: RenderStyle) -> list[str]:
    km = _nice_scale(canvas.x1 - canvas.x0)
    length = km * style.px_per_km
    x = style.margin_px
    y = canvas.height - 18
    label = f"{km:g} km"
    return [
        '<g id="scale-bar">',
        f'<line x1="{_f(x)}" y1="{_f(y)}" x2="{_f(x + length)}" y2="{_f(y)}" stroke="#000000" stroke-width="2"/>',
        f'<line x1="{_f(x)}" y1="{_f(y - 4)}" x2="{_f(x)}" y2="{_f(y + 4)}" stroke="#000000"/>',
        f'<line x1="{_f(x + length)}" y1="{_f(y - 4)}" x2="{_f(x + length)}" y2="{_f(y + 4)}" stroke="#000000"/>',
        f'<text x="{_f(x + length + 6)}" y="{_f(y + 4)}" font-family="sans-serif" font-size="11">{label}</text>',
        "</g>",
    ]


def save_map(inst: PlanningInstance, plan: DeploymentPlan, path, style: RenderStyle | None = None) -> None:
    Path(path).write_text(render_map(inst, plan, style), encoding="utf-8")
