"""Interface-fitted curved triangulations of a rectangle split by a star curve.

The inner region is a structured "diamond" disk (ring ``j`` carries ``4 j``
vertices) mapped radially onto the star domain; the outer region is a
layered transfinite blend between the interface and the rectangle
boundary. Only edges on the interface are curved.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .curves import PolarStar, Segment, build_edge_chart, curve_to_text, parse_curve, segment_chart

BOUNDARY, INTERIOR, INTERFACE = 0, 1, 2
KIND_NAMES = {BOUNDARY: "boundary", INTERIOR: "interior", INTERFACE: "interface"}
KIND_CODES = {v: k for k, v in KIND_NAMES.items()}


class MeshGenerationError(RuntimeError):
    pass


class MeshFormatError(ValueError):
    pass


@dataclass(frozen=True)
class DomainSpec:
    xmin: float
    xmax: float
    ymin: float
    ymax: float
    interface: PolarStar
    n0: int = 8
    layers0: int | None = None  # outer blending layers at level 0; None picks from geometry
    grading: float = 1.0  # outer layer l sits at blend fraction (l / L) ** grading
    spacing: str = "arclength"  # interface vertices equidistant in "arclength" or in "angle"
    theta0: float = -math.pi / 4  # polar angle of the first interface vertex

    def __post_init__(self):
        if self.spacing not in ("arclength", "angle"):
            raise ValueError(f"unknown spacing {self.spacing!r}")
        if self.n0 < 4 or self.n0 % 4:
            raise ValueError("n0 must be >= 4 and divisible by 4")
        theta = np.linspace(0, 2 * math.pi, 2049)
        p = self.interface.eval(theta)
        inside = ((p[:, 0] > self.xmin) & (p[:, 0] < self.xmax)
                  & (p[:, 1] > self.ymin) & (p[:, 1] < self.ymax))
        if not inside.all():
            raise ValueError("interface must lie strictly inside the rectangle")

    @property
    def area(self):
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)


@dataclass(eq=False)
class Mesh:
    """Curved triangulation with edge classification.

    Local edge ``j`` of a triangle joins its vertices ``j`` and ``j+1``.
    ``edge_elems[e]`` lists the adjacent elements (``-1`` when absent).
    Curved edges reference ``curves[edge_curve[e]]`` over ``edge_param[e]``,
    oriented from ``edges[e, 0]`` to ``edges[e, 1]``.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    regions: np.ndarray
    edges: np.ndarray
    edge_kind: np.ndarray
    edge_elems: np.ndarray
    elem_edges: np.ndarray
    curves: list = field(default_factory=list)
    edge_curve: np.ndarray | None = None
    edge_param: np.ndarray | None = None
    level: int = 0
    _charts: dict = field(default_factory=dict, repr=False)
    _hT: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_elements(self):
        return len(self.triangles)

    @property
    def n_edges(self):
        return len(self.edges)

    def is_curved(self, e: int) -> bool:
        return self.edge_curve[e] >= 0

    @property
    def curved_edges(self):
        return np.flatnonzero(self.edge_curve >= 0)

    def edge_chart(self, e: int):
        ch = self._charts.get(e)
        if ch is None:
            if self.edge_curve[e] >= 0:
                a, b = self.edge_param[e]
                ch = build_edge_chart(self.curves[self.edge_curve[e]], a, b)
            else:
                p0, p1 = self.vertices[self.edges[e]]
                ch = segment_chart(p0, p1)
            self._charts[e] = ch
        return ch

    def edge_length(self, e: int) -> float:
        if self.edge_curve[e] >= 0:
            return self.edge_chart(e).length
        p0, p1 = self.vertices[self.edges[e]]
        return float(np.hypot(*(p1 - p0)))

    @property
    def element_diameters(self) -> np.ndarray:
        """``h_T``: max distance over vertices and 17 samples of each curved edge."""
        if self._hT is None:
            P = self.vertices[self.triangles]
            d = np.max(np.linalg.norm(P[:, [0, 1, 2]] - P[:, [1, 2, 0]], axis=2), axis=1)
            for e in self.curved_edges:
                pts = self.edge_chart(e).eval_fraction(np.linspace(0.0, 1.0, 17))
                for t in self.edge_elems[e]:
                    if t < 0:
                        continue
                    allp = np.vstack([P[t], pts])
                    diff = allp[:, None, :] - allp[None, :, :]
                    d[t] = max(d[t], float(np.sqrt((diff ** 2).sum(-1)).max()))
            self._hT = d
        return self._hT

    @property
    def h(self) -> float:
        return float(self.element_diameters.max())

    def signed_areas(self) -> np.ndarray:
        """Straight-triangle signed areas (orientation test)."""
        P = self.vertices[self.triangles]
        a, b, c = P[:, 0], P[:, 1], P[:, 2]
        return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))

    def interface_side_elements(self, e: int):
        """(region-1 element, region-2 element) of an interface edge."""
        t0, t1 = self.edge_elems[e]
        if self.regions[t0] == 1:
            return t0, t1
        return t1, t0


def build_mesh(vertices, triangles, regions, curved=None, curves=(), level=0) -> Mesh:
    """Assemble topology from triangles.

    ``curved`` maps an oriented vertex pair ``(v0, v1)`` to ``(curve_id, a, b)``.
    Edge kinds follow from adjacency: one element gives boundary, two elements
    with different regions give interface.
    """
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    regions = np.asarray(regions, dtype=np.int64)
    curved = dict(curved or {})
    nT = len(triangles)
    loc = np.stack([triangles, np.roll(triangles, -1, axis=1)], axis=2).reshape(-1, 2)
    key = np.sort(loc, axis=1)
    uniq, first, inv = np.unique(key, axis=0, return_index=True, return_inverse=True)
    inv = inv.ravel()
    # keep first-seen orientation, but follow the curve orientation if curved
    edges = loc[first].copy()
    nE = len(uniq)
    elem_edges = inv.reshape(nT, 3)
    edge_elems = -np.ones((nE, 2), dtype=np.int64)
    count = np.zeros(nE, dtype=np.int64)
    for idx, e in enumerate(inv):
        t = idx // 3
        if count[e] >= 2:
            raise MeshGenerationError(f"edge {tuple(uniq[e])} shared by more than two elements")
        edge_elems[e, count[e]] = t
        count[e] += 1
    kind = np.where(count == 1, BOUNDARY, INTERIOR)
    two = count == 2
    diff = np.zeros(nE, dtype=bool)
    diff[two] = regions[edge_elems[two, 0]] != regions[edge_elems[two, 1]]
    kind[diff] = INTERFACE
    edge_curve = -np.ones(nE, dtype=np.int64)
    edge_param = np.zeros((nE, 2))
    if curved:
        lookup = {tuple(k): i for i, k in enumerate(uniq.tolist())}
        for (v0, v1), (cid, a, b) in curved.items():
            e = lookup[(min(v0, v1), max(v0, v1))]
            edges[e] = (v0, v1)
            edge_curve[e] = cid
            edge_param[e] = (a, b)
    return Mesh(vertices, triangles, regions, edges, kind.astype(np.int64), edge_elems, elem_edges,
                list(curves), edge_curve, edge_param, level)


# ---------------------------------------------------------------- generator

class _AngleMap:
    """Angle offset (from ``theta0``) at which the curve has covered fraction ``u`` of its length."""

    def __init__(self, curve, theta0: float, panels: int = 2048):
        self.curve = curve
        self.theta0 = theta0
        x, w = np.polynomial.legendre.leggauss(7)
        self.x, self.w = x, w
        self.edges = theta0 + 2 * math.pi * np.arange(panels + 1) / panels
        lo, hi = self.edges[:-1], self.edges[1:]
        self.cum = np.concatenate([[0.0], np.cumsum(self._integral(lo, hi))])
        self.total = self.cum[-1]

    def _speed(self, t):
        d = self.curve.deriv(t)
        return np.hypot(d[..., 0], d[..., 1])

    def _integral(self, lo, hi):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        return half * (self._speed(mid[:, None] + half[:, None] * self.x) @ self.w)

    def __call__(self, u):
        u = np.asarray(u, float)
        target = u * self.total
        k = np.clip(np.searchsorted(self.cum, target, side="right") - 1, 0, len(self.edges) - 2)
        lo = self.edges[k]
        frac = (target - self.cum[k]) / (self.cum[k + 1] - self.cum[k])
        t = lo + frac * (self.edges[k + 1] - lo)
        for _ in range(6):
            t = t - (self.cum[k] + self._integral(lo, t) - target) / self._speed(t)
        return t - self.theta0

def _default_layers(spec: DomainSpec, n: int) -> int:
    ang = spec.theta0 + 2 * math.pi * np.arange(n) / n
    G = spec.interface.eval(ang)
    B = _boundary_points(spec, n)
    gap = np.linalg.norm(B - G, axis=1).mean()
    perim_in = np.linalg.norm(np.roll(G, -1, 0) - G, axis=1).mean()
    perim_out = np.linalg.norm(np.roll(B, -1, 0) - B, axis=1).mean()
    return max(1, int(round(gap / (0.5 * (perim_in + perim_out)))))


def _boundary_points(spec: DomainSpec, n: int) -> np.ndarray:
    """``n`` equispaced perimeter points; point ``i`` faces interface vertex ``i``.

    The perimeter coordinate runs 0..4 with corner ``q`` at ``q``; the
    interface angle ``theta0`` faces coordinate ``(theta0 + pi/4) / (pi/2)``.
    """
    corners = np.array([[spec.xmax, spec.ymin], [spec.xmax, spec.ymax],
                        [spec.xmin, spec.ymax], [spec.xmin, spec.ymin]])
    tau0 = ((spec.theta0 + math.pi / 4) / (math.pi / 2)) % 4.0
    tau = (tau0 + 4.0 * np.arange(n) / n) % 4.0
    q = np.floor(tau).astype(int)
    frac = tau - q
    snap = np.abs(frac - np.round(frac)) < 1e-12
    q = np.where(snap, np.round(tau).astype(int) % 4, q)
    frac = np.where(snap, 0.0, frac)
    if snap.sum() != 4:
        raise MeshGenerationError(f"{n} boundary points do not hit the four rectangle corners")
    c0, c1 = corners[q], corners[(q + 1) % 4]
    return c0 + frac[:, None] * (c1 - c0)


def generate_fitted_mesh(spec: DomainSpec, level: int) -> Mesh:
    """Deterministic fitted mesh with ``n0 * 2**level`` interface edges."""
    if level < 0:
        raise ValueError("level must be >= 0")
    curve = spec.interface
    n = spec.n0 * 2 ** level
    m = n // 4
    L0 = spec.layers0 if spec.layers0 is not None else _default_layers(spec, spec.n0)
    L = L0 * 2 ** level
    theta0 = spec.theta0
    cx, cy = curve.center
    if spec.spacing == "arclength":
        amap = _AngleMap(curve, theta0)
    else:
        amap = lambda u: 2 * math.pi * np.asarray(u, float)

    verts = [np.array([[cx, cy]])]
    ring_start = [0]
    offset = 1
    for j in range(1, m + 1):
        u = np.arange(4 * j) / (4 * j)
        w = j / m
        ang = theta0 + (1.0 - w) * 2 * math.pi * u + w * amap(u)
        if j == m:
            pts = curve.eval(ang)
        else:
            r = (j / m) * curve.radius(ang)
            pts = np.stack([cx + r * np.cos(ang), cy + r * np.sin(ang)], axis=1)
        verts.append(pts)
        ring_start.append(offset)
        offset += 4 * j

    def ring_id(j, p):
        if j == 0:
            return 0
        return ring_start[j] + (p % (4 * j))

    tris, regs = [], []
    for j in range(1, m + 1):
        for q in range(4):
            for i in range(j):
                tris.append((ring_id(j - 1, q * (j - 1) + i), ring_id(j, q * j + i), ring_id(j, q * j + i + 1)))
            for i in range(j - 1):
                tris.append((ring_id(j - 1, q * (j - 1) + i), ring_id(j, q * j + i + 1),
                             ring_id(j - 1, q * (j - 1) + i + 1)))
    regs += [1] * len(tris)

    iface_ang = theta0 + amap(np.arange(n + 1) / n)
    G = verts[-1]
    B = _boundary_points(spec, n)
    layer_ids = [ring_start[m] + np.arange(n)]
    for l in range(1, L + 1):
        s = (l / L) ** spec.grading
        pts = B.copy() if l == L else (1.0 - s) * G + s * B
        verts.append(pts)
        layer_ids.append(offset + np.arange(n))
        offset += n
    V = np.vstack(verts)

    for l in range(L):
        a, b = layer_ids[l], layer_ids[l + 1]
        for i in range(n):
            i1 = (i + 1) % n
            p00, p10, p11, p01 = a[i], b[i], b[i1], a[i1]
            d1 = np.sum((V[p00] - V[p11]) ** 2)
            d2 = np.sum((V[p10] - V[p01]) ** 2)
            if d1 <= d2:
                tris += [(p00, p10, p11), (p00, p11, p01)]
            else:
                tris += [(p00, p10, p01), (p10, p11, p01)]
            regs += [2, 2]

    curved = {}
    base = ring_start[m]
    for i in range(n):
        a, b = iface_ang[i], iface_ang[i + 1]
        curved[(base + i, base + (i + 1) % n)] = (0, a, b)

    mesh = build_mesh(V, tris, regs, curved, [curve], level)
    area = mesh.signed_areas()
    bad = np.flatnonzero(area <= 0)
    if len(bad):
        raise MeshGenerationError(f"inverted element {int(bad[0])} (signed area {area[bad[0]]:.3e})")
    folded = first_folded_element(mesh)
    if folded is not None:
        raise MeshGenerationError(f"curved element {folded} folds over: interface too coarse for its curvature")
    return mesh


def circle_domain(n0: int = 8) -> DomainSpec:
    from .curves import Circle

    return DomainSpec(-2.0, 2.0, -2.0, 2.0, Circle((0.0, 0.0), 1.0), n0)


def flower_domain(n0: int = 40, layers0: int = 3) -> DomainSpec:
    from .curves import flower

    return DomainSpec(-4.0, 4.0, -4.0, 4.0, flower(3.0, -1.0, 4), n0, layers0)


# ---------------------------------------------------------------- validation

def first_folded_element(mesh: Mesh, degree: int = 12):
    """First curved element whose blending map has ``det <= 0`` at a quadrature point, else None."""
    from .quadrature import build_curved_map, triangle_rule

    pts = triangle_rule(degree).points
    for e in mesh.curved_edges:
        for t in mesh.edge_elems[e]:
            if t >= 0 and build_curved_map(mesh, int(t)).det(pts).min() <= 0.0:
                return int(t)
    return None


@dataclass
class MeshReport:
    n_vertices: int
    n_elements: int
    edge_counts: dict
    h: float
    min_angle_deg: float
    min_area: float
    shape_ratio: float
    checks: dict

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def _angles_deg(mesh: Mesh) -> np.ndarray:
    P = mesh.vertices[mesh.triangles]
    out = []
    for j in range(3):
        a, b, c = P[:, j], P[:, (j + 1) % 3], P[:, (j + 2) % 3]
        u, v = b - a, c - a
        cosang = np.sum(u * v, 1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        out.append(np.degrees(np.arccos(np.clip(cosang, -1, 1))))
    return np.stack(out, axis=1)


def mesh_statistics(mesh: Mesh):
    counts = {name: int(np.sum(mesh.edge_kind == code)) for code, name in KIND_NAMES.items()}
    return mesh.h, counts


def validate_mesh(mesh: Mesh, tol: float = 1e-12) -> MeshReport:
    """Recompute every mesh invariant; failures are reported, not raised."""
    checks = {}
    nT, nE, nV = mesh.n_elements, mesh.n_edges, mesh.n_vertices
    area = mesh.signed_areas()
    checks["ccw_positive_area"] = bool(np.all(area > 0))

    cnt = np.sum(mesh.edge_elems >= 0, axis=1)
    checks["edge_adjacency"] = bool(np.all(np.where(mesh.edge_kind == BOUNDARY, cnt == 1, cnt == 2)))

    t0, t1 = mesh.edge_elems[:, 0], mesh.edge_elems[:, 1]
    kind = mesh.edge_kind
    both = (t0 >= 0) & (t1 >= 0)
    same = np.zeros(nE, dtype=bool)
    same[both] = mesh.regions[t0[both]] == mesh.regions[t1[both]]
    ok_edge = np.where(kind == BOUNDARY, (t1 < 0) & (t0 >= 0),
                       both & np.where(kind == INTERIOR, same, ~same))
    checks["edge_classification"] = bool(ok_edge.all())

    # element <-> edge consistency
    tri = mesh.triangles
    ev = mesh.edges[mesh.elem_edges]  # (nT, 3, 2)
    a, b = tri, np.roll(tri, -1, axis=1)
    match = ((ev[..., 0] == a) & (ev[..., 1] == b)) | ((ev[..., 0] == b) & (ev[..., 1] == a))
    adj = mesh.edge_elems[mesh.elem_edges]  # (nT, 3, 2)
    mine = (adj == np.arange(nT)[:, None, None]).any(axis=2)
    checks["element_edge_consistency"] = bool((match & mine).all())

    ok = True
    for e in np.flatnonzero(mesh.edge_kind == INTERFACE):
        if not mesh.is_curved(e):
            continue
        ch = mesh.edge_chart(e)
        scale = max(1.0, float(np.abs(mesh.vertices).max()))
        ends = ch.eval(np.array([0.0, ch.length]))
        ok &= bool(np.allclose(ends, mesh.vertices[mesh.edges[e]], rtol=0, atol=tol * scale))
        curve = mesh.curves[mesh.edge_curve[e]]
        if isinstance(curve, PolarStar):
            pts = np.vstack([ends, ch.eval(np.array([0.5 * ch.length]))])
            rr = np.hypot(pts[:, 0] - curve.center[0], pts[:, 1] - curve.center[1])
            ok &= bool(np.allclose(rr, curve.radius(np.arctan2(pts[:, 1] - curve.center[1],
                                                                pts[:, 0] - curve.center[0])),
                                   rtol=0, atol=tol * scale))
    checks["interface_on_curve"] = ok

    checks["at_most_one_curved_edge"] = bool(np.all((mesh.edge_curve[mesh.elem_edges] >= 0).sum(axis=1) <= 1))

    checks["euler"] = nV - nE + nT == 1
    checks["curved_jacobian_positive"] = first_folded_element(mesh) is None

    angles = _angles_deg(mesh)
    P = mesh.vertices[mesh.triangles]
    edge_len = np.linalg.norm(P - np.roll(P, -1, axis=1), axis=2)
    inradius = 2 * np.abs(area) / edge_len.sum(1)
    ratio = mesh.element_diameters / np.where(inradius > 0, inradius, np.nan)
    h, counts = mesh_statistics(mesh)
    return MeshReport(nV, nT, counts, h, float(angles.min()), float(area.min()),
                      float(np.nanmax(ratio)) if len(ratio) else 0.0, checks)


# ---------------------------------------------------------------- text format

def write_mesh(mesh: Mesh, path) -> None:
    fmt = "{:.17g}".format
    lines = ["wgmesh v1", f"level {mesh.level}"]
    for c in mesh.curves:
        lines.append("curve " + curve_to_text(c))
    for x, y in mesh.vertices:
        lines.append(f"v {fmt(x)} {fmt(y)}")
    for (a, b, c), r in zip(mesh.triangles, mesh.regions):
        lines.append(f"t {a} {b} {c} {r}")
    for e, (a, b) in enumerate(mesh.edges):
        rec = f"e {a} {b} {KIND_NAMES[int(mesh.edge_kind[e])]}"
        if mesh.edge_curve[e] >= 0:
            pa, pb = mesh.edge_param[e]
            rec += f" {mesh.edge_curve[e]} {fmt(pa)} {fmt(pb)}"
        lines.append(rec)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != "wgmesh v1":
        raise MeshFormatError("missing 'wgmesh v1' header")
    curves, V, T, R, E = [], [], [], [], []
    level = 0
    for ln in lines[1:]:
        tag, *rest = ln.split()
        try:
            if tag == "level":
                level = int(rest[0])
            elif tag == "curve":
                curves.append(parse_curve(" ".join(rest)))
            elif tag == "v":
                V.append((float(rest[0]), float(rest[1])))
            elif tag == "t":
                T.append(tuple(int(v) for v in rest[:3]))
                R.append(int(rest[3]))
            elif tag == "e":
                E.append(rest)
            else:
                raise MeshFormatError(f"unknown record {tag!r}")
        except (IndexError, ValueError) as exc:
            raise MeshFormatError(f"bad record {ln!r}") from exc
    curved = {}
    for rec in E:
        if len(rec) >= 6:
            curved[(int(rec[0]), int(rec[1]))] = (int(rec[3]), float(rec[4]), float(rec[5]))
    mesh = build_mesh(V, T, R, curved, curves, level)
    # edge orientation and kind come from the file
    lookup = {tuple(sorted(map(int, ed))): i for i, ed in enumerate(mesh.edges.tolist())}
    for rec in E:
        v0, v1 = int(rec[0]), int(rec[1])
        e = lookup.get(tuple(sorted((v0, v1))))
        if e is None:
            raise MeshFormatError(f"edge ({v0}, {v1}) not in any triangle")
        mesh.edges[e] = (v0, v1)
        mesh.edge_kind[e] = KIND_CODES[rec[2]]
    return mesh
