"""Quadrature on edges and on triangles with at most one curved edge."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class GeometryError(RuntimeError):
    """Inverted or degenerate element geometry."""


@dataclass(frozen=True)
class QuadRule1D:
    nodes: np.ndarray  # on [0, 1]
    weights: np.ndarray


@dataclass(frozen=True)
class QuadRuleTri:
    points: np.ndarray  # (nq, 2) reference coordinates (xi, eta)
    weights: np.ndarray  # sum to 1/2
    degree: int

    @property
    def barycentric(self):
        xi, eta = self.points[:, 0], self.points[:, 1]
        return np.stack([1.0 - xi - eta, xi, eta], axis=1)


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> QuadRule1D:
    """n-point Gauss-Legendre rule on [0, 1], exact to degree 2n-1."""
    if not 1 <= n <= 64:
        raise ValueError(f"gauss_legendre supports 1 <= n <= 64, got {n}")
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadRule1D(0.5 * (x + 1.0), 0.5 * w)


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadRuleTri:
    """Collapsed (Duffy) tensor Gauss rule on the reference triangle.

    Exact for total degree ``degree``: with ``xi = u (1 - v)``, ``eta = v``
    the integrand gains one power of ``(1 - v)``, so ``v`` needs exactness
    ``degree + 1``.
    """
    if not 1 <= degree <= 20:
        raise ValueError(f"triangle_rule supports degree 1..20, got {degree}")
    n = (degree + 3) // 2
    g = gauss_legendre(n)
    u, v = np.meshgrid(g.nodes, g.nodes, indexing="ij")
    wu, wv = np.meshgrid(g.weights, g.weights, indexing="ij")
    xi = (u * (1.0 - v)).ravel()
    eta = v.ravel()
    w = (wu * wv * (1.0 - v)).ravel()
    return QuadRuleTri(np.stack([xi, eta], axis=1), w, degree)


@lru_cache(maxsize=None)
def curved_triangle_rule(degree: int) -> QuadRuleTri:
    """Collapsed Gauss rule with the collapse at the reference origin.

    In ``xi = lam (1 - s)``, ``eta = lam s`` the blended map of a curved
    element is ``C + lam (F(s) - C)``, smooth in both variables, whereas the
    rule collapsed elsewhere sees the direction-dependent ``s = eta / lam``
    at ``C`` and converges slowly.  Three extra nodes in ``s`` absorb the
    non-polynomial curve.
    """
    if not 1 <= degree <= 20:
        raise ValueError(f"curved_triangle_rule supports degree 1..20, got {degree}")
    n = degree // 2 + 1
    gl, gs = gauss_legendre(n + 1), gauss_legendre(n + 4)
    lam, s = np.meshgrid(gl.nodes, gs.nodes, indexing="ij")
    wl, ws = np.meshgrid(gl.weights, gs.weights, indexing="ij")
    xi = (lam * (1.0 - s)).ravel()
    eta = (lam * s).ravel()
    return QuadRuleTri(np.stack([xi, eta], axis=1), (wl * ws * lam).ravel(), degree)


@dataclass
class CurvedTriMap:
    """Map from the reference triangle to a physical triangle.

    Reference vertices (0,0), (1,0), (0,1) go to ``C``, ``A``, ``B``. When
    ``chart`` is given, the edge A-B is replaced by the curve through the
    blending ``(xi + eta) * (F(s) - chord(s))`` with ``s = eta / (xi + eta)``,
    which vanishes on the two straight edges.
    """

    C: np.ndarray
    A: np.ndarray
    B: np.ndarray
    chart: object = None
    reversed: bool = False  # chart runs B -> A

    @property
    def affine_jac(self):
        return np.stack([self.A - self.C, self.B - self.C], axis=1)  # columns d/dxi, d/deta

    def _curve(self, s):
        s = np.asarray(s, float)
        if self.reversed:
            return self.chart.eval_fraction(1.0 - s), -self.chart.tangent_fraction(1.0 - s)
        return self.chart.eval_fraction(s), self.chart.tangent_fraction(s)

    def __call__(self, ref):
        """Physical points and Jacobian matrices at reference points ``ref`` (nq, 2)."""
        ref = np.asarray(ref, float)
        xi, eta = ref[:, 0], ref[:, 1]
        J0 = self.affine_jac
        x = self.C + ref @ J0.T
        jac = np.broadcast_to(J0, (len(ref), 2, 2)).copy()
        if self.chart is None:
            return x, jac
        lam = xi + eta
        s = np.where(lam > 0, eta / np.where(lam > 0, lam, 1.0), 0.0)
        F, dF = self._curve(s)
        chord = (1.0 - s)[:, None] * self.A + s[:, None] * self.B
        D = F - chord
        dD = dF + (self.A - self.B)
        x = x + lam[:, None] * D
        jac[:, :, 0] += D - s[:, None] * dD
        jac[:, :, 1] += D + (1.0 - s)[:, None] * dD
        return x, jac

    def det(self, ref):
        _, jac = self(ref)
        return jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]


def build_curved_map(mesh, elem: int) -> CurvedTriMap:
    """Reference map of element ``elem``; the curved edge (if any) becomes A-B."""
    tri = mesh.triangles[elem]
    P = mesh.vertices[tri]
    curved = [j for j in range(3) if mesh.is_curved(mesh.elem_edges[elem, j])]
    if len(curved) > 1:
        raise GeometryError(f"element {elem} has {len(curved)} curved edges")
    if not curved:
        return CurvedTriMap(P[0].copy(), P[1].copy(), P[2].copy())
    j = curved[0]
    A, B, C = P[j], P[(j + 1) % 3], P[(j + 2) % 3]
    e = mesh.elem_edges[elem, j]
    chart = mesh.edge_chart(e)
    rev = mesh.edges[e, 0] != tri[j]
    return CurvedTriMap(C.copy(), A.copy(), B.copy(), chart, bool(rev))


def element_quadrature(cmap: CurvedTriMap, degree: int, elem: int | None = None):
    """Physical points and weights ``w_q * det(DPhi)`` for one element."""
    rule = curved_triangle_rule(degree) if cmap.chart is not None else triangle_rule(degree)
    x, jac = cmap(rule.points)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    if np.any(det <= 0.0):
        raise GeometryError(f"non-positive Jacobian in element {elem}")
    return x, rule.weights * det


def integrate_element(mesh, elem: int, f, degree: int) -> float:
    x, w = element_quadrature(build_curved_map(mesh, elem), degree, elem)
    return float(np.dot(w, f(x[:, 0], x[:, 1])))


def integrate_edge(chart, f, n: int) -> float:
    """``int_e f ds`` with ``f`` evaluated on (x, y, t) where ``t`` is the chart parameter."""
    g = gauss_legendre(n)
    t = g.nodes * chart.length
    x = chart.eval(t)
    J = chart.jacobian(t)
    return float(np.dot(g.weights * chart.length * J, f(x[:, 0], x[:, 1], t)))
