"""Global DOF layout, strong constraints, assembly and linear solves.

Interface edges carry two trace blocks, one per side.  Boundary blocks are
fixed to ``Q_b g``; side-2 interface blocks are slaved to side 1 through
``c2 = c1 - Q_b g_D``.  Every raw DOF therefore depends on at most one free
DOF with unit weight, which keeps the reduction to the free system a pure
index map plus a lift vector.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .basis import legendre_values
from .curves import LEFT, RIGHT, chart_normal
from .meshgen import BOUNDARY, INTERFACE
from .quadrature import gauss_legendre
from .wg_operator import DiscretizationConfig, ElementGeometry, local_loads, local_operators

FREE, FIXED, SLAVED = 0, 1, 2


class AssemblyError(RuntimeError):
    pass


class SolverError(RuntimeError):
    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = list(history or [])


class MeshClassificationError(ValueError):
    pass


@dataclass
class DofLayout:
    n_elements: int
    n_interior: int
    n_edge: int
    edge_offset: np.ndarray  # start of the first (side-1) block of each edge
    edge_blocks: np.ndarray  # 1, or 2 on interface edges
    elem_map: np.ndarray  # (nT, nloc) raw index of every local DOF
    n_raw: int

    def interior(self, t: int) -> np.ndarray:
        return t * self.n_interior + np.arange(self.n_interior)

    def edge(self, e: int, side: int = 1) -> np.ndarray:
        if side not in (1, 2) or side > self.edge_blocks[e]:
            raise IndexError(f"edge {e} has no side-{side} block")
        return self.edge_offset[e] + (side - 1) * self.n_edge + np.arange(self.n_edge)


def build_dof_layout(mesh, config: DiscretizationConfig) -> DofLayout:
    nk, nb = config.n_interior, config.n_edge
    nT, nE = mesh.n_elements, mesh.n_edges
    blocks = np.where(mesh.edge_kind == INTERFACE, 2, 1)
    offset = nT * nk + nb * np.concatenate([[0], np.cumsum(blocks)[:-1]])
    n_raw = int(nT * nk + nb * blocks.sum())

    emap = np.empty((nT, config.n_local), dtype=np.int64)
    emap[:, :nk] = np.arange(nT)[:, None] * nk + np.arange(nk)[None, :]
    for j in range(3):
        e = mesh.elem_edges[:, j]
        side2 = (blocks[e] == 2) & (mesh.regions != 1)
        start = offset[e] + np.where(side2, nb, 0)
        emap[:, nk + j * nb:nk + (j + 1) * nb] = start[:, None] + np.arange(nb)[None, :]
    return DofLayout(nT, nk, nb, offset, blocks, emap, n_raw)


# ------------------------------------------------------------------ edge projections

def _edge_points(mesh, edges, n):
    """Quadrature points, arclength weights and fractions on a list of edges."""
    g = gauss_legendre(n)
    edges = np.asarray(edges, dtype=np.int64)
    V = mesh.vertices[mesh.edges[edges]]
    X = V[:, None, 0] + g.nodes[None, :, None] * (V[:, 1] - V[:, 0])[:, None]
    ln = np.linalg.norm(V[:, 1] - V[:, 0], axis=1)
    W = g.weights[None, :] * ln[:, None]
    for i, e in enumerate(edges):
        if mesh.is_curved(e):
            ch = mesh.edge_chart(e)
            X[i] = ch.eval_fraction(g.nodes)
            tan = ch.tangent_fraction(g.nodes)
            W[i] = g.weights * np.hypot(tan[:, 0], tan[:, 1])
    return X, W, g.nodes


def project_edges(mesh, edges, f, ell: int, n: int | None = None) -> np.ndarray:
    """Arclength-weighted projections of ``f(x, y)`` onto ``P_ell`` for many edges, shape (len, ell+1)."""
    X, W, s = _edge_points(mesh, edges, n or ell + 8)
    if len(X) == 0:
        return np.zeros((0, ell + 1))
    Z = legendre_values(s, ell)
    G = np.einsum("eq,ql,qm->elm", W, Z, Z)
    rhs = np.einsum("eq,eq,ql->el", W, f(X[..., 0], X[..., 1]), Z)
    return np.linalg.solve(G, rhs[..., None])[..., 0]


def interface_normals(mesh, e: int, s):
    """Unit normal on interface edge ``e`` pointing out of its region-1 element."""
    t1, _ = mesh.interface_side_elements(e)
    j = int(np.flatnonzero(mesh.elem_edges[t1] == e)[0])
    side = LEFT if mesh.edges[e, 0] == mesh.triangles[t1, j] else RIGHT
    ch = mesh.edge_chart(e)
    return chart_normal(ch, np.asarray(s) * ch.length, side)


# ------------------------------------------------------------------ constraints

@dataclass
class ConstraintSet:
    """Raw DOF ``i`` equals ``x[master[i]] + value[i]`` (slaved/free) or ``value[i]`` (fixed)."""

    status: np.ndarray
    value: np.ndarray
    master: np.ndarray  # free index or -1
    n_free: int

    @property
    def free_dofs(self):
        return np.flatnonzero(self.status == FREE)

    def expand(self, x) -> np.ndarray:
        out = self.value.copy()
        m = self.master >= 0
        out[m] += np.asarray(x)[self.master[m]]
        return out

    @property
    def P(self):
        m = np.flatnonzero(self.master >= 0)
        return sp.csr_matrix((np.ones(len(m)), (m, self.master[m])), shape=(len(self.status), self.n_free))


def build_constraints(mesh, layout: DofLayout, problem, ell: int, edge_points: int | None = None) -> ConstraintSet:
    n = layout.n_raw
    nb = layout.n_edge
    status = np.zeros(n, dtype=np.int8)
    value = np.zeros(n)
    interface = np.flatnonzero(mesh.edge_kind == INTERFACE)
    boundary = np.flatnonzero(mesh.edge_kind == BOUNDARY)
    bad = [e for e in interface if np.any(mesh.edge_elems[e] < 0)]
    if bad or np.intersect1d(interface, boundary).size:
        raise MeshClassificationError(f"edge {bad[0] if bad else interface[0]} is both boundary and interface")
    npts = edge_points or ell + 8

    if len(boundary):
        cb = project_edges(mesh, boundary, problem.g, ell, npts)
        idx = layout.edge_offset[boundary][:, None] + np.arange(nb)[None, :]
        status[idx] = FIXED
        value[idx] = cb

    pair = np.full(n, -1, dtype=np.int64)
    if len(interface):
        cd = project_edges(mesh, interface, problem.gD, ell, npts)
        s1 = layout.edge_offset[interface][:, None] + np.arange(nb)[None, :]
        s2 = s1 + nb
        status[s2] = SLAVED
        value[s2] = -cd
        pair[s2] = s1

    free = np.flatnonzero(status == FREE)
    master = np.full(n, -1, dtype=np.int64)
    master[free] = np.arange(len(free))
    sl = np.flatnonzero(status == SLAVED)
    master[sl] = master[pair[sl]]
    if np.any(master[sl] < 0):
        raise AssemblyError("interface block slaved to a non-free DOF")
    return ConstraintSet(status, value, master, len(free))


# ------------------------------------------------------------------ assembly

@dataclass
class LinearSystem:
    K: sp.csr_matrix
    rhs: np.ndarray
    layout: DofLayout
    constraints: ConstraintSet
    config: DiscretizationConfig
    ops: object = None
    a_T: np.ndarray | None = None
    load: np.ndarray | None = None  # raw right side before the lift
    neumann: str = "single"
    timings: dict = field(default_factory=dict)

    @property
    def n_free(self):
        return self.constraints.n_free

    @property
    def n_raw(self):
        return self.layout.n_raw

    def local_matrices(self):
        return self.ops.matrices(self.a_T)


@dataclass
class LocalMatrices:
    A: np.ndarray  # a_T (grad_w, grad_w)_T
    S: np.ndarray
    F: np.ndarray  # (f, phi_i)_T on interior DOFs, zero on traces
    dofs: np.ndarray  # raw index of every local DOF


def local_matrices(element: int, mesh, problem, config: DiscretizationConfig, layout: DofLayout | None = None) -> LocalMatrices:
    layout = layout or build_dof_layout(mesh, config)
    ops = local_operators(mesh, config, elems=[element])
    a = float(element_coefficients(mesh, problem)[element])
    F = np.zeros(config.n_local)
    F[:config.n_interior] = local_loads(ops.geom, problem.f, config.k, mesh.regions[[element]])[0]
    return LocalMatrices(ops.stiffness(np.array([a]))[0], ops.S[0], F, layout.elem_map[element].copy())


def element_coefficients(mesh, problem) -> np.ndarray:
    return np.where(mesh.regions == 1, problem.a1, problem.a2).astype(float)


def neumann_load(mesh, layout: DofLayout, problem, ell: int, convention: str = "single", n: int | None = None):
    """Raw-vector contribution of ``<g_N, v_b>`` on interface edges."""
    if convention not in ("single", "literal"):
        raise ValueError(f"unknown Neumann convention {convention!r}")
    out = np.zeros(layout.n_raw)
    interface = np.flatnonzero(mesh.edge_kind == INTERFACE)
    if not len(interface):
        return out
    X, W, s = _edge_points(mesh, interface, n or ell + 8)
    Z = legendre_values(s, ell)
    nb = layout.n_edge
    for i, e in enumerate(interface):
        nrm = interface_normals(mesh, e, s)
        gn = problem.gN(X[i, :, 0], X[i, :, 1], nrm[:, 0], nrm[:, 1])
        vec = Z.T @ (W[i] * gn)
        out[layout.edge(e, 1)] += vec
        if convention == "literal":
            out[layout.edge(e, 2)] += vec
    return out


def assemble(mesh, problem, config: DiscretizationConfig, neumann: str = "single", check_spd: bool = False) -> LinearSystem:
    t0 = time.perf_counter()
    layout = build_dof_layout(mesh, config)
    cons = build_constraints(mesh, layout, problem, config.ell_b, config.n_edge_points)
    t1 = time.perf_counter()
    geom = ElementGeometry(mesh, config.volume_degree, config.n_edge_points)
    ops = local_operators(mesh, config, geom=geom)
    a_T = element_coefficients(mesh, problem)
    Aloc = ops.matrices(a_T)
    t2 = time.perf_counter()

    load = np.zeros(layout.n_raw)
    F = local_loads(geom, problem.f, config.k, mesh.regions)
    np.add.at(load, layout.elem_map[:, :config.n_interior], F)
    load += neumann_load(mesh, layout, problem, config.ell_b, neumann, config.n_edge_points)

    emap = layout.elem_map
    cloc = cons.value[emap]
    lift = np.einsum("tij,tj->ti", Aloc, cloc)
    raw_rhs = load.copy()
    np.add.at(raw_rhs, emap, -lift)
    fmap = cons.master[emap]
    rows = np.broadcast_to(fmap[:, :, None], Aloc.shape)
    cols = np.broadcast_to(fmap[:, None, :], Aloc.shape)
    keep = (rows >= 0) & (cols >= 0)
    nf = cons.n_free
    K = sp.coo_matrix((Aloc[keep], (rows[keep], cols[keep])), shape=(nf, nf)).tocsr()
    K.sum_duplicates()
    rhs = np.zeros(nf)
    m = cons.master >= 0
    np.add.at(rhs, cons.master[m], raw_rhs[m])
    t3 = time.perf_counter()

    asym = abs(K - K.T).max() if nf else 0.0
    if nf and asym > 1e-12 * abs(K).max():
        raise AssemblyError(f"assembled matrix is not symmetric (max asymmetry {asym:.3e})")
    if nf and np.any(K.diagonal() <= 0):
        raise AssemblyError("non-positive diagonal entry: constraint or mesh defect")
    system = LinearSystem(K, rhs, layout, cons, config, ops, a_T, load, neumann,
                          {"constraints": t1 - t0, "local": t2 - t1, "global": t3 - t2})
    if check_spd:
        lam = smallest_eigenvalue(system)
        if not lam > 0:
            raise AssemblyError(f"assembled matrix is not positive definite (lambda_min={lam:.3e})")
    return system


def smallest_eigenvalue(system: LinearSystem) -> float:
    """Smallest eigenvalue of the free-DOF matrix (dense; small systems only)."""
    return float(sla.eigh(system.K.toarray(), eigvals_only=True, subset_by_index=[0, 0])[0])


# ------------------------------------------------------------------ solves

@dataclass
class WgSolution:
    coeffs: np.ndarray  # raw DOF vector
    free: np.ndarray
    method: str
    iterations: int
    residual: float
    system: LinearSystem = field(repr=False, default=None)

    def interior(self, t: int):
        return self.coeffs[self.system.layout.interior(t)]

    def edge(self, e: int, side: int = 1):
        return self.coeffs[self.system.layout.edge(e, side)]


METHODS = ("cg_jacobi", "dense_cholesky", "sparse_lu")


def solve(system: LinearSystem, method: str = "cg_jacobi", tol: float = 1e-12, maxiter: int | None = None) -> WgSolution:
    if not tol > 0:
        raise ValueError("tol must be positive")
    K, b = system.K, system.rhs
    nb = np.linalg.norm(b)
    iters = 0
    if K.shape[0] == 0:
        x = np.zeros(0)
    elif method == "dense_cholesky":
        try:
            x = sla.cho_solve(sla.cho_factor(K.toarray()), b)
        except sla.LinAlgError as exc:
            raise SolverError("Cholesky factorization failed: matrix not positive definite") from exc
    elif method == "sparse_lu":
        x = spla.splu(K.tocsc()).solve(b)
    elif method == "cg_jacobi":
        d = K.diagonal()
        Minv = spla.LinearOperator(K.shape, matvec=lambda v: v / d, dtype=float)
        history = []

        def cb(xk):
            history.append(np.linalg.norm(b - K @ xk) / (nb or 1.0))

        maxiter = maxiter or max(1000, 10 * K.shape[0])
        x, info = spla.cg(K, b, rtol=tol, atol=0.0, maxiter=maxiter, M=Minv, callback=cb)
        # the recurrence residual can drift from the true one; polish from the iterate
        for _ in range(3):
            if info != 0 or np.linalg.norm(b - K @ x) <= tol * nb:
                break
            x, info = spla.cg(K, b, x0=x, rtol=0.1 * tol, atol=0.0, maxiter=maxiter, M=Minv, callback=cb)
        iters = len(history)
        if info != 0:
            raise SolverError(f"CG did not converge in {maxiter} iterations", history)
    else:
        raise ValueError(f"unknown solver method {method!r}")
    res = float(np.linalg.norm(b - K @ x) / nb) if nb > 0 else float(np.linalg.norm(K @ x))
    if method == "dense_cholesky" and len(x):
        iters = 1
    return WgSolution(system.constraints.expand(x), x, method, iters, res, system)


def solve_problem(mesh, problem, config, method="cg_jacobi", tol=1e-12, neumann="single") -> WgSolution:
    return solve(assemble(mesh, problem, config, neumann), method, tol)


def write_system(system: LinearSystem, directory) -> tuple[Path, Path]:
    """Dump the free-DOF matrix as ``row col value`` lines and the right side, 17 significant digits."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    K = system.K.tocoo()
    mpath, rpath = d / "matrix.coo", d / "rhs.txt"
    with open(mpath, "w") as fh:
        fh.write(f"{K.shape[0]} {K.shape[1]} {K.nnz}\n")
        for i, j, v in zip(K.row, K.col, K.data):
            fh.write(f"{i} {j} {v:.17g}\n")
    np.savetxt(rpath, system.rhs, fmt="%.17g")
    return mpath, rpath
