"""Self-contained SVG line charts of scenario results (no graphics dependency)."""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET

W, H = 640, 360
MARGIN = 56


class PlotError(ValueError):
    pass


def _scale(lo, hi, a, b):
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    return lambda x: a + (x - lo) * (b - a) / (hi - lo)


def _panel(svg, top, title, xs, ys, errs, refs, ylabel):
    g = ET.SubElement(svg, "g", transform=f"translate(0,{top})")
    ET.SubElement(g, "text", x=str(W // 2), y="20", **{"text-anchor": "middle"}).text = title
    lo = min(min(y - e for y, e in zip(ys, errs)), *(r for r, _ in refs)) if refs else \
        min(y - e for y, e in zip(ys, errs))
    hi = max(max(y + e for y, e in zip(ys, errs)), *(r for r, _ in refs)) if refs else \
        max(y + e for y, e in zip(ys, errs))
    pad = 0.08 * (hi - lo or 1.0)
    sx = _scale(min(xs), max(xs), MARGIN, W - MARGIN)
    sy = _scale(lo - pad, hi + pad, H - MARGIN, 36)
    ET.SubElement(g, "line", x1=str(MARGIN), y1=str(H - MARGIN), x2=str(W - MARGIN),
                  y2=str(H - MARGIN), stroke="black")
    ET.SubElement(g, "line", x1=str(MARGIN), y1="36", x2=str(MARGIN), y2=str(H - MARGIN),
                  stroke="black")
    ET.SubElement(g, "text", x=str(W // 2), y=str(H - 16), **{"text-anchor": "middle"}).text = "ln N"
    ET.SubElement(g, "text", x="14", y=str(H // 2),
                  transform=f"rotate(-90 14 {H // 2})", **{"text-anchor": "middle"}).text = ylabel
    for y, label in refs:
        yy = f"{sy(y):.2f}"
        ET.SubElement(g, "line", x1=str(MARGIN), y1=yy, x2=str(W - MARGIN), y2=yy,
                      stroke="gray", **{"stroke-dasharray": "6,4"})
        ET.SubElement(g, "text", x=str(W - MARGIN + 2), y=yy, fill="gray",
                      **{"font-size": "10"}).text = f"{label} {y:.5f}"
    pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
    ET.SubElement(g, "polyline", points=pts, fill="none", stroke="steelblue",
                  **{"stroke-width": "2"})
    for x, y, e in zip(xs, ys, errs):
        ET.SubElement(g, "circle", cx=f"{sx(x):.2f}", cy=f"{sy(y):.2f}", r="3", fill="steelblue")
        if e > 0:
            ET.SubElement(g, "line", x1=f"{sx(x):.2f}", y1=f"{sy(y - e):.2f}", x2=f"{sx(x):.2f}",
                          y2=f"{sy(y + e):.2f}", stroke="steelblue")
        ET.SubElement(g, "text", x=f"{sx(x):.2f}", y=str(H - MARGIN + 14),
                      **{"text-anchor": "middle", "font-size": "10"}).text = f"{x:.3g}"


def emit_plot(result, path: str) -> str:
    """Write h_per_particle against ln N (plus a sup-gap panel when available) to ``path``."""
    rows = result.rows
    if len(rows) < 2:
        raise PlotError("a plot needs at least two rows")
    ent_rows = [r for r in rows if r.report is not None]
    gap_rows = [r for r in rows if r.sup_gap is not None]
    panels = int(bool(ent_rows)) + int(bool(gap_rows))
    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(W),
                     height=str(H * max(panels, 1)), viewBox=f"0 0 {W} {H * max(panels, 1)}")
    top = 0
    name = result.config.scenario
    if ent_rows:
        refs = []
        if result.target is not None:
            refs.append((result.target, "target"))
        if result.limit_entropy is not None:
            refs.append((result.limit_entropy, "H(limit|gamma)"))
        _panel(svg, top, f"{name}: per-particle entropy", [math.log(r.N) for r in ent_rows],
               [r.report.h_per_particle for r in ent_rows],
               [3 * r.report.std_error_per_particle for r in ent_rows], refs, "H_N / N")
        top += H
    if gap_rows:
        _panel(svg, top, f"{name}: sup |Pi_1 - limit|", [math.log(r.N) for r in gap_rows],
               [r.sup_gap for r in gap_rows], [0.0] * len(gap_rows), [], "sup gap")
    data = ET.tostring(svg, encoding="unicode")
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write('<?xml version="1.0" encoding="UTF-8"?>\n' + data + "\n")
    except OSError as exc:
        raise PlotError(f"cannot write {path}: {exc}") from exc
    return path
