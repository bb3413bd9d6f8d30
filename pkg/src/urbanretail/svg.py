"""Tiny deterministic SVG 1.1 writer.

Numbers are printed with fixed precision and elements are emitted in call
order, so identical input gives byte-identical files.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

PALETTE = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939",
    "#8c6d31", "#843c39", "#7b4173", "#3182bd", "#e6550d", "#31a354",
]


def colour(k: int) -> str:
    if k < len(PALETTE):
        return PALETTE[k]
    h = (k * 137.508) % 360  # golden-angle hue walk
    return f"hsl({h:.1f},55%,50%)"


def _n(v: float) -> str:
    s = f"{v:.2f}".rstrip("0").rstrip(".")
    return "0" if s == "-0" else s


def _attrs(kw) -> str:
    parts = []
    for k, v in kw.items():
        if v is None:
            continue
        k = k.rstrip("_").replace("_", "-")
        parts.append(f'{k}="{_n(v) if isinstance(v, float) else escape(str(v))}"')
    return " ".join(parts)


class Canvas:
    def __init__(self, width: float, height: float):
        self.width, self.height = width, height
        self.items: list[str] = []

    def line(self, x1, y1, x2, y2, stroke="#000", width=1.0, dash=None):
        self.items.append(f"<line {_attrs(dict(x1=float(x1), y1=float(y1), x2=float(x2), y2=float(y2), stroke=stroke, stroke_width=float(width), stroke_dasharray=dash))}/>")

    def polyline(self, pts, stroke="#000", width=1.0, dash=None):
        if len(pts) < 2:
            return
        p = " ".join(f"{_n(x)},{_n(y)}" for x, y in pts)
        self.items.append(f'<polyline points="{p}" {_attrs(dict(fill="none", stroke=stroke, stroke_width=float(width), stroke_dasharray=dash))}/>')

    def rect(self, x, y, w, h, fill, stroke=None):
        self.items.append(f"<rect {_attrs(dict(x=float(x), y=float(y), width=float(w), height=float(h), fill=fill, stroke=stroke))}/>")

    def circle(self, x, y, r, fill):
        self.items.append(f"<circle {_attrs(dict(cx=float(x), cy=float(y), r=float(r), fill=fill))}/>")

    def text(self, x, y, s, size=11, anchor="start", rotate=None):
        tr = f"rotate({_n(rotate)} {_n(x)} {_n(y)})" if rotate is not None else None
        self.items.append(
            f"<text {_attrs(dict(x=float(x), y=float(y), font_size=size, text_anchor=anchor, font_family='sans-serif', transform=tr))}>{escape(str(s))}</text>"
        )

    def render(self) -> str:
        head = (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
            f'width="{_n(self.width)}" height="{_n(self.height)}" '
            f'viewBox="0 0 {_n(self.width)} {_n(self.height)}" shape-rendering="crispEdges">\n'
        )
        return head + "\n".join(self.items) + "\n</svg>\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.render())


class Axes:
    """Maps data coordinates to a plotting box on a canvas."""

    def __init__(self, canvas, box, xlim, ylim):
        self.c = canvas
        self.x0, self.y0, self.w, self.h = box
        self.xlim, self.ylim = xlim, ylim

    def X(self, v):
        a, b = self.xlim
        return self.x0 + (v - a) / (b - a) * self.w

    def Y(self, v):
        a, b = self.ylim
        return self.y0 + self.h - (v - a) / (b - a) * self.h

    def frame(self, xlabel, ylabel, xticks, yticks, ytick_labels=None, ylabel_offset=42):
        c = self.c
        c.rect(self.x0, self.y0, self.w, self.h, fill="none", stroke="#000")
        for t in xticks:
            c.line(self.X(t), self.y0 + self.h, self.X(t), self.y0 + self.h + 4)
            c.text(self.X(t), self.y0 + self.h + 16, _n(t), anchor="middle")
        labels = ytick_labels or [_n(t) for t in yticks]
        for t, lab in zip(yticks, labels):
            c.line(self.x0 - 4, self.Y(t), self.x0, self.Y(t))
            c.text(self.x0 - 7, self.Y(t) + 4, lab, anchor="end", size=10)
        c.text(self.x0 + self.w / 2, self.y0 + self.h + 34, xlabel, anchor="middle", size=13)
        c.text(self.x0 - ylabel_offset, self.y0 + self.h / 2, ylabel, anchor="middle", size=13,
               rotate=-90)

    def legend(self, entries, x, y, swatch="rect"):
        """``entries``: list of (label, colour, dash)."""
        for k, (label, col, dash) in enumerate(entries):
            yy = y + 16 * k
            if swatch == "rect":
                self.c.rect(x, yy - 9, 12, 10, fill=col, stroke="#000")
            else:
                self.c.line(x, yy - 4, x + 18, yy - 4, stroke=col, width=2.0, dash=dash)
            self.c.text(x + 22, yy, label, size=10)
