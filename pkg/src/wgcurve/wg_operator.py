"""Element-local weak Galerkin operators.

All operators are computed for a batch of elements at once.  The local
degrees of freedom of an element are ordered as
``[interior (dim P_k) | edge 0 (ell_b+1) | edge 1 | edge 2]`` where local
edge ``j`` joins triangle vertices ``j`` and ``j+1``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import default_degree, element_frame, dim_P, legendre_values, scaled_monomials
from .curves import LEFT, RIGHT, chart_normal
from .quadrature import GeometryError, build_curved_map, curved_triangle_rule, gauss_legendre


@dataclass(frozen=True)
class DiscretizationConfig:
    """Interior degree ``k`` with edge degree and weak-gradient degree fixed by ``variant``.

    ``standard``: P_k / P_{k-1} / [P_{k-1}]^2.  ``super``: P_k / P_{k+1} / [P_{k+1}]^2.

    ``rho=None`` selects 1 for ``standard`` and 0 for ``super``.  The
    superconvergent weak gradient already controls every non-constant local
    mode, and a stabilizer term of size ``O(h^k)`` in energy would cap the
    rates at the standard ones.
    """

    k: int
    variant: str = "standard"
    rho: float | None = None
    quad_degree: int | None = None
    edge_points: int | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.variant not in ("standard", "super"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.rho is None:
            object.__setattr__(self, "rho", 1.0 if self.variant == "standard" else 0.0)
        if self.rho < 0 or (self.variant == "standard" and self.rho == 0):
            raise ValueError("rho must be positive (or zero for the super variant)")

    @property
    def ell_b(self) -> int:
        return self.k - 1 if self.variant == "standard" else self.k + 1

    @property
    def r(self) -> int:
        return self.ell_b

    @property
    def n_interior(self) -> int:
        return dim_P(self.k)

    @property
    def n_edge(self) -> int:
        return self.ell_b + 1

    @property
    def n_local(self) -> int:
        return self.n_interior + 3 * self.n_edge

    @property
    def volume_degree(self) -> int:
        return self.quad_degree or default_degree(self.k)

    @property
    def n_edge_points(self) -> int:
        return self.edge_points or self.k + 8


class ElementGeometry:
    """Quadrature data for a set of elements.

    Volume: points ``X`` (nT, nq, 2), weights ``W`` (nT, nq).
    Edges: points ``EX`` (nT, 3, ne, 2), arclength weights ``EW``,
    outward normals ``EN`` and chart fractions ``ES`` measured along the
    global edge orientation.
    """

    def __init__(self, mesh, degree: int, edge_points: int, elems=None):
        self.mesh = mesh
        self.elems = np.arange(mesh.n_elements) if elems is None else np.asarray(elems, dtype=np.int64)
        self.degree, self.edge_points = degree, edge_points
        tri = mesh.triangles[self.elems]
        P = mesh.vertices[tri]
        self.center, self.frame = element_frame(P)
        self.hT = mesh.element_diameters[self.elems]
        nT = len(self.elems)

        # one rule for every element keeps the batch rectangular
        rule = crule = curved_triangle_rule(degree)
        xi, eta = rule.points[:, 0], rule.points[:, 1]
        d1, d2 = P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]
        self.X = P[:, None, 0] + xi[None, :, None] * d1[:, None] + eta[None, :, None] * d2[:, None]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        self.W = rule.weights[None, :] * det[:, None]

        g = gauss_legendre(edge_points)
        s = g.nodes
        ne = len(s)
        self.EX = np.empty((nT, 3, ne, 2))
        self.EW = np.empty((nT, 3, ne))
        self.EN = np.empty((nT, 3, ne, 2))
        self.ES = np.empty((nT, 3, ne))
        edges = mesh.elem_edges[self.elems]
        for j in range(3):
            a, b = P[:, j], P[:, (j + 1) % 3]
            fwd = mesh.edges[edges[:, j], 0] == tri[:, j]
            start = np.where(fwd[:, None], a, b)
            end = np.where(fwd[:, None], b, a)
            self.EX[:, j] = start[:, None] + s[None, :, None] * (end - start)[:, None]
            d = b - a
            ln = np.hypot(d[:, 0], d[:, 1])
            self.EW[:, j] = g.weights[None, :] * ln[:, None]
            nrm = np.stack([d[:, 1] / ln, -d[:, 0] / ln], axis=1)
            self.EN[:, j] = nrm[:, None, :]
            self.ES[:, j] = s[None, :]

        self.curved_local = []  # (batch index, local edge j)
        for t_idx, t in enumerate(self.elems):
            cj = [j for j in range(3) if mesh.is_curved(edges[t_idx, j])]
            if not cj:
                continue
            if len(cj) > 1:
                raise GeometryError(f"element {t} has more than one curved edge")
            j = cj[0]
            self.curved_local.append((t_idx, j))
            cmap = build_curved_map(mesh, t)
            x, jac = cmap(crule.points)
            dj = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
            if np.any(dj <= 0):
                raise GeometryError(f"non-positive Jacobian in element {t}")
            self.X[t_idx], self.W[t_idx] = x, crule.weights * dj
            e = edges[t_idx, j]
            chart = mesh.edge_chart(e)
            self.EX[t_idx, j] = chart.eval_fraction(s)
            tan = chart.tangent_fraction(s)
            self.EW[t_idx, j] = g.weights * np.hypot(tan[:, 0], tan[:, 1])
            side = LEFT if mesh.edges[e, 0] == tri[t_idx, j] else RIGHT
            self.EN[t_idx, j] = chart_normal(chart, s * chart.length, side)

    def scaled(self, pts):
        """Affine basis coordinates of points with leading element axis."""
        shape = (len(self.elems),) + (1,) * (pts.ndim - 2)
        d = pts - self.center.reshape(shape + (2,))
        F = self.frame.reshape(shape + (2, 2))
        z = np.einsum("...ab,...b->...a", F, d)
        return z[..., 0], z[..., 1]

    def interior_values(self, k, pts=None):
        zx, zy = self.scaled(self.X if pts is None else pts)
        return scaled_monomials(zx, zy, k)

    def interior_gradients(self, k, pts=None):
        zx, zy = self.scaled(self.X if pts is None else pts)
        v, d1, d2 = scaled_monomials(zx, zy, k, deriv=True)
        shape = (len(self.elems),) + (1,) * (d1.ndim - 1)
        F = [[self.frame[:, a, b].reshape(shape) for b in range(2)] for a in range(2)]
        return v, d1 * F[0][0] + d2 * F[1][0], d1 * F[0][1] + d2 * F[1][1]

    def edge_values(self, ell):
        return legendre_values(self.ES, ell)


@dataclass
class LocalOperators:
    """Batched local matrices.

    ``Gx``/``Gy`` (nT, nr, nloc) map local DOFs to weak-gradient coefficients
    in the scaled-monomial basis of ``P_r(T)``; ``M`` (nT, nr, nr) is its Gram
    matrix; ``K`` is the unit-coefficient stiffness ``G^T M G`` and ``S`` the
    stabilization.  Edge Grams ``E`` (nT, 3, nb, nb) and trace projections
    ``QbP`` (nT, 3, nb, nk) are kept for post-processing.
    """

    config: DiscretizationConfig
    geom: ElementGeometry
    Gx: np.ndarray
    Gy: np.ndarray
    M: np.ndarray
    K: np.ndarray
    S: np.ndarray
    E: np.ndarray
    QbP: np.ndarray

    def stiffness(self, a_T):
        return np.asarray(a_T, float)[:, None, None] * self.K

    def matrices(self, a_T):
        return self.stiffness(a_T) + self.S


def local_operators(mesh, config: DiscretizationConfig, elems=None, geom: ElementGeometry | None = None):
    """Weak gradient, stiffness and stabilization for a batch of elements."""
    if geom is None:
        geom = ElementGeometry(mesh, config.volume_degree, config.n_edge_points, elems)
    k, r, ell = config.k, config.r, config.ell_b
    nk, nb = config.n_interior, config.n_edge
    nloc = config.n_local
    nT = len(geom.elems)

    phi_k = geom.interior_values(k)
    phi_r, dxr, dyr = geom.interior_gradients(r)
    W = geom.W
    M = np.einsum("tq,tqa,tqb->tab", W, phi_r, phi_r)
    Rx = np.zeros((nT, phi_r.shape[-1], nloc))
    Ry = np.zeros_like(Rx)
    Rx[:, :, :nk] = -np.einsum("tq,tqm,tqi->tmi", W, dxr, phi_k)
    Ry[:, :, :nk] = -np.einsum("tq,tqm,tqi->tmi", W, dyr, phi_k)

    zeta = geom.edge_values(ell)  # (nT, 3, ne, nb)
    phi_r_e = geom.interior_values(r, geom.EX)  # (nT, 3, ne, nr)
    phi_k_e = geom.interior_values(k, geom.EX)  # (nT, 3, ne, nk)
    EW, EN = geom.EW, geom.EN
    for j in range(3):
        sl = slice(nk + j * nb, nk + (j + 1) * nb)
        Rx[:, :, sl] = np.einsum("tq,tqm,tql->tml", EW[:, j] * EN[:, j, :, 0], phi_r_e[:, j], zeta[:, j])
        Ry[:, :, sl] = np.einsum("tq,tqm,tql->tml", EW[:, j] * EN[:, j, :, 1], phi_r_e[:, j], zeta[:, j])

    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise GeometryError("weak-gradient Gram matrix not positive definite") from exc
    # K = R^T M^{-1} R as Y^T Y with Y = L^{-1} R: symmetric PSD by construction
    Yx, Yy = np.linalg.solve(L, Rx), np.linalg.solve(L, Ry)
    Lt = L.transpose(0, 2, 1)
    Gx, Gy = np.linalg.solve(Lt, Yx), np.linalg.solve(Lt, Yy)
    K = np.einsum("tmi,tmj->tij", Yx, Yx) + np.einsum("tmi,tmj->tij", Yy, Yy)

    E = np.einsum("tjq,tjql,tjqm->tjlm", EW, zeta, zeta)
    C = np.einsum("tjq,tjql,tjqi->tjli", EW, zeta, phi_k_e)
    QbP = np.linalg.solve(E, C)
    S = np.zeros((nT, nloc, nloc))
    for j in range(3):
        D = np.zeros((nT, nb, nloc))
        D[:, :, :nk] = QbP[:, j]
        D[:, :, nk + j * nb:nk + (j + 1) * nb] = -np.eye(nb)
        S += np.einsum("tli,tlm,tmj->tij", D, E[:, j], D)
    S *= (config.rho / geom.hT)[:, None, None]
    S = 0.5 * (S + S.transpose(0, 2, 1))
    return LocalOperators(config, geom, Gx, Gy, M, K, S, E, QbP)


def local_loads(geom: ElementGeometry, f, k: int, regions=None):
    """``(f, phi_i)_T`` for all interior basis functions; ``f(x, y)`` or ``f(x, y, region)``."""
    phi = geom.interior_values(k)
    X = geom.X
    if regions is None:
        fv = f(X[..., 0], X[..., 1])
    else:
        fv = f(X[..., 0], X[..., 1], np.broadcast_to(np.asarray(regions)[:, None], X.shape[:2]))
    return np.einsum("tq,tq,tqi->ti", geom.W, fv, phi)


# ---------------------------------------------------------------- single-element API

@dataclass
class LocalWeakGradient:
    element: int
    Gx: np.ndarray  # (nr, nloc)
    Gy: np.ndarray
    M: np.ndarray  # Gram of the scalar P_r basis
    ops: LocalOperators

    @property
    def matrix(self):
        """Stacked map local DOFs -> coefficients of (grad_w v)_x, (grad_w v)_y."""
        return np.vstack([self.Gx, self.Gy])


def weak_gradient_operator(element: int, mesh, config: DiscretizationConfig) -> LocalWeakGradient:
    ops = local_operators(mesh, config, [element])
    return LocalWeakGradient(element, ops.Gx[0], ops.Gy[0], ops.M[0], ops)


def local_stiffness(element: int, a_T: float, wg: LocalWeakGradient) -> np.ndarray:
    if not a_T > 0:
        raise ValueError("coefficient must be positive")
    G = wg.M
    return a_T * (wg.Gx.T @ G @ wg.Gx + wg.Gy.T @ G @ wg.Gy)


def local_stabilization(element: int, mesh, config: DiscretizationConfig) -> np.ndarray:
    return local_operators(mesh, config, [element]).S[0]


def local_load(element: int, mesh, f, k: int, degree: int | None = None) -> np.ndarray:
    geom = ElementGeometry(mesh, degree or default_degree(k), k + 8, [element])
    return local_loads(geom, f, k)[0]
