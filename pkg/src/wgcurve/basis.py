"""Element and edge polynomial bases and the L2-type projections onto them.

Element bases are monomials ``z1^i z2^j`` (``i + j <= k``) in the affine
coordinates ``z = 3 B^{-1} (x - c)``, where ``c`` is the vertex mean and the
columns of ``B`` are two edge vectors of the straight triangle.  On the
reference triangle these run over ``[-1, 2]``, so Gram conditioning depends
on ``k`` only, not on the element's size or aspect ratio.  Edge bases are
Legendre polynomials in the chart fraction ``s = t / |e|``.  Edge inner products are taken with respect to arclength,
so the chart Jacobian weights every edge Gram matrix.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .quadrature import GeometryError, build_curved_map, element_quadrature, gauss_legendre

log = logging.getLogger(__name__)


COND_ALARM = 1e8


@lru_cache(maxsize=None)
def monomial_exponents(k: int) -> np.ndarray:
    return np.array([(d - j, j) for d in range(k + 1) for j in range(d + 1)], dtype=np.int64)


def dim_P(k: int) -> int:
    return (k + 1) * (k + 2) // 2


def scaled_monomials(xs, ys, k: int, deriv: bool = False):
    """Values (and optionally gradients) of the degree-``k`` monomials.

    ``xs``, ``ys`` are already centred and scaled.  Gradients are with
    respect to the scaled coordinates.
    """
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    px = [np.ones_like(xs)]
    py = [np.ones_like(ys)]
    for _ in range(k):
        px.append(px[-1] * xs)
        py.append(py[-1] * ys)
    exps = monomial_exponents(k)
    val = np.stack([px[i] * py[j] for i, j in exps], axis=-1)
    if not deriv:
        return val
    zero = np.zeros_like(xs)
    dx = np.stack([i * px[i - 1] * py[j] if i else zero for i, j in exps], axis=-1)
    dy = np.stack([j * px[i] * py[j - 1] if j else zero for i, j in exps], axis=-1)
    return val, dx, dy


def legendre_values(s, ell: int):
    """``P_l(2 s - 1)`` for ``l = 0..ell`` along the last axis."""
    x = 2.0 * np.asarray(s, float) - 1.0
    out = [np.ones_like(x)]
    if ell >= 1:
        out.append(x)
    for n in range(1, ell):
        out.append(((2 * n + 1) * x * out[n] - n * out[n - 1]) / (n + 1))
    return np.stack(out, axis=-1)


def element_frame(P):
    """Centres ``(..., 2)`` and maps ``(..., 2, 2)`` with ``z = F (x - c)`` for vertices ``P`` ``(..., 3, 2)``."""
    P = np.asarray(P, float)
    B = np.stack([P[..., 1, :] - P[..., 0, :], P[..., 2, :] - P[..., 0, :]], axis=-1)
    return P.mean(axis=-2), 3.0 * np.linalg.inv(B)


@dataclass(frozen=True)
class ElementBasis:
    """``frame`` is the 2x2 map ``F`` (a scalar ``h`` means ``F = I / h``)."""

    center: tuple
    frame: object
    k: int

    @property
    def dim(self) -> int:
        return dim_P(self.k)

    def _F(self):
        F = np.asarray(self.frame, float)
        return np.eye(2) / float(F) if F.ndim == 0 else F

    def scaled(self, x, y):
        F = self._F()
        dx, dy = np.asarray(x, float) - self.center[0], np.asarray(y, float) - self.center[1]
        return F[0, 0] * dx + F[0, 1] * dy, F[1, 0] * dx + F[1, 1] * dy

    def values(self, x, y):
        return scaled_monomials(*self.scaled(x, y), self.k)

    def gradients(self, x, y):
        F = self._F()
        _, d1, d2 = scaled_monomials(*self.scaled(x, y), self.k, deriv=True)
        return d1 * F[0, 0] + d2 * F[1, 0], d1 * F[0, 1] + d2 * F[1, 1]


@dataclass(frozen=True)
class EdgeBasis:
    chart: object
    ell: int

    @property
    def dim(self) -> int:
        return self.ell + 1

    def values_t(self, t):
        return legendre_values(np.asarray(t, float) / self.chart.length, self.ell)


def element_center(mesh, elem: int):
    return mesh.vertices[mesh.triangles[elem]].mean(axis=0)


def element_basis(mesh, elem: int, k: int) -> ElementBasis:
    c, F = element_frame(mesh.vertices[mesh.triangles[elem]])
    return ElementBasis((float(c[0]), float(c[1])), tuple(map(tuple, F)), k)


def default_degree(k: int) -> int:
    return min(20, 2 * k + 8)


def _element_gram(basis: ElementBasis, x, w):
    phi = basis.values(x[:, 0], x[:, 1])
    G = (phi * w[:, None]).T @ phi
    return G, phi


def gram_condition(mesh, elem: int, k: int, degree: int | None = None) -> float:
    x, w = element_quadrature(build_curved_map(mesh, elem), degree or default_degree(k), elem)
    G, _ = _element_gram(element_basis(mesh, elem, k), x, w)
    cond = float(np.linalg.cond(G))
    if cond > COND_ALARM:
        log.warning("element %d: P_%d Gram condition %.2e exceeds %.0e", elem, k, cond, COND_ALARM)
    return cond


def project_Q0(mesh, elem: int, f, k: int, degree: int | None = None) -> np.ndarray:
    """Coefficients of the L2 projection of ``f(x, y)`` onto ``P_k(T)``."""
    x, w = element_quadrature(build_curved_map(mesh, elem), degree or default_degree(k), elem)
    basis = element_basis(mesh, elem, k)
    G, phi = _element_gram(basis, x, w)
    rhs = phi.T @ (w * f(x[:, 0], x[:, 1]))
    try:
        return np.linalg.solve(G, rhs)
    except np.linalg.LinAlgError as exc:
        raise GeometryError(f"singular Gram matrix on element {elem}") from exc


def project_Qh_grad(mesh, elem: int, g, r: int, degree: int | None = None):
    """Componentwise L2 projection of a vector field ``g(x, y) -> (gx, gy)`` onto ``[P_r(T)]^2``."""
    x, w = element_quadrature(build_curved_map(mesh, elem), degree or default_degree(r), elem)
    basis = element_basis(mesh, elem, r)
    G, phi = _element_gram(basis, x, w)
    gx, gy = g(x[:, 0], x[:, 1])
    rhs = phi.T @ np.stack([w * gx, w * gy], axis=1)
    try:
        sol = np.linalg.solve(G, rhs)
    except np.linalg.LinAlgError as exc:
        raise GeometryError(f"singular Gram matrix on element {elem}") from exc
    return sol[:, 0], sol[:, 1]


class ChartError(RuntimeError):
    pass


def edge_quadrature(chart, n: int):
    """Chart parameters ``t``, points and arclength weights of an n-point rule."""
    g = gauss_legendre(n)
    t = g.nodes * chart.length
    return t, chart.eval(t), g.weights * chart.length * chart.jacobian(t)


def project_Qb(chart, f, ell: int, n: int | None = None, weighted: bool = True) -> np.ndarray:
    """Jacobian-weighted projection of ``f(x, y)`` onto ``V_b(e, ell)``.

    With ``weighted=False`` the plain parameter-space projection is returned;
    the two coincide on straight edges where the Jacobian is 1.
    """
    t, x, w = edge_quadrature(chart, n or ell + 8)
    if not weighted:
        w = gauss_legendre(n or ell + 8).weights * chart.length
    psi = legendre_values(t / chart.length, ell)
    G = (psi * w[:, None]).T @ psi
    rhs = psi.T @ (w * f(x[:, 0], x[:, 1]))
    try:
        return np.linalg.solve(G, rhs)
    except np.linalg.LinAlgError as exc:
        raise ChartError("singular weighted edge Gram matrix") from exc


def evaluate(basis, coeffs, where):
    """Evaluate ``sum c_i phi_i`` at a point ``(x, y)`` (element) or parameter ``t`` (edge)."""
    coeffs = np.asarray(coeffs, float)
    if coeffs.shape[-1] != basis.dim:
        raise ValueError(f"expected {basis.dim} coefficients, got {coeffs.shape[-1]}")
    if isinstance(basis, EdgeBasis):
        return basis.values_t(where) @ coeffs
    x, y = where
    return basis.values(x, y) @ coeffs
