"""Static SVG renderings of meshes and per-element fields."""
from __future__ import annotations

import math

import numpy as np

ARC_SAMPLES = 32

# viridis anchors
_CMAP = np.array([[68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]], float)


def _color(u: float) -> str:
    u = min(1.0, max(0.0, u))
    x = u * (len(_CMAP) - 1)
    i = min(int(x), len(_CMAP) - 2)
    c = _CMAP[i] + (x - i) * (_CMAP[i + 1] - _CMAP[i])
    return "#{:02x}{:02x}{:02x}".format(*(int(round(v)) for v in c))


def element_outline(mesh, t: int) -> np.ndarray:
    """Closed polyline of element ``t``; curved edges sampled at ``ARC_SAMPLES`` points."""
    tri = mesh.triangles[t]
    pts = []
    for j in range(3):
        e = mesh.elem_edges[t, j]
        a = mesh.vertices[tri[j]]
        if mesh.is_curved(e):
            s = np.linspace(0.0, 1.0, ARC_SAMPLES)
            if mesh.edges[e, 0] != tri[j]:
                s = s[::-1]
            pts.append(mesh.edge_chart(e).eval_fraction(s)[:-1])
        else:
            pts.append(a[None, :])
    return np.vstack(pts)


class _Canvas:
    def __init__(self, mesh, width=640, pad=10):
        lo, hi = mesh.vertices.min(0), mesh.vertices.max(0)
        self.lo, self.pad = lo, pad
        self.scale = (width - 2 * pad) / max(hi - lo)
        self.w = width
        self.h = int(math.ceil((hi[1] - lo[1]) * self.scale + 2 * pad))
        self.items = []

    def xy(self, p):
        x = self.pad + (p[..., 0] - self.lo[0]) * self.scale
        y = self.h - self.pad - (p[..., 1] - self.lo[1]) * self.scale
        return x, y

    def poly(self, pts, **attrs):
        x, y = self.xy(pts)
        path = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(x, y))
        extra = " ".join(f'{k.replace("_", "-")}="{v}"' for k, v in attrs.items())
        self.items.append(f'<polygon points="{path}" {extra}/>')

    def line(self, pts, **attrs):
        x, y = self.xy(pts)
        path = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(x, y))
        extra = " ".join(f'{k.replace("_", "-")}="{v}"' for k, v in attrs.items())
        self.items.append(f'<polyline points="{path}" fill="none" {extra}/>')

    def text(self, x, y, s):
        self.items.append(f'<text x="{x}" y="{y}" font-size="12" font-family="monospace">{s}</text>')

    def render(self, extra_height=0):
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.w}" height="{self.h + extra_height}" '
                f'viewBox="0 0 {self.w} {self.h + extra_height}">')
        return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>', *self.items, "</svg>"]) + "\n"


def mesh_svg(mesh, width: int = 640) -> str:
    """Wireframe with region-1 elements shaded and interface arcs drawn heavier."""
    cv = _Canvas(mesh, width)
    for t in range(mesh.n_elements):
        fill = "#dbe9f6" if mesh.regions[t] == 1 else "#ffffff"
        cv.poly(element_outline(mesh, t), fill=fill, stroke="#555555", stroke_width="0.4")
    for e in mesh.curved_edges:
        cv.line(mesh.edge_chart(e).eval_fraction(np.linspace(0, 1, ARC_SAMPLES)), stroke="#c0392b", stroke_width="1.5")
    return cv.render()


def field_svg(mesh, values, width: int = 640, label: str = "") -> str:
    """Per-element heat map on a log10 color scale."""
    vals = np.asarray(values, float)
    pos = vals[vals > 0]
    lo, hi = (np.log10(pos.min()), np.log10(pos.max())) if len(pos) else (0.0, 1.0)
    span = hi - lo if hi > lo else 1.0
    cv = _Canvas(mesh, width)
    for t in range(mesh.n_elements):
        u = (np.log10(vals[t]) - lo) / span if vals[t] > 0 else 0.0
        c = _color(u)
        cv.poly(element_outline(mesh, t), fill=c, stroke=c, stroke_width="0.3")
    for i in range(11):
        cv.items.append(f'<rect x="{10 + 20 * i}" y="{cv.h + 4}" width="20" height="10" fill="{_color(i / 10)}"/>')
    cv.text(240, cv.h + 14, f"{label} log10 range [{lo:.2f}, {hi:.2f}]")
    return cv.render(extra_height=24)
