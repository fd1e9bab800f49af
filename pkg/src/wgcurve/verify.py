"""Error norms, convergence studies and identity diagnostics."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .meshgen import INTERFACE, generate_fitted_mesh
from .problems import ProblemSpec, example1, example2, make_problem, manufactured_jump  # noqa: F401
from .basis import legendre_values
from .system import LinearSystem, WgSolution, _edge_points, assemble, build_dof_layout, project_edges, smallest_eigenvalue, solve
from .wg_operator import DiscretizationConfig, ElementGeometry, local_operators


class MissingExactSolution(ValueError):
    pass


# ------------------------------------------------------------------ projections of the exact solution

def interior_gram(geom: ElementGeometry, k: int):
    phi = geom.interior_values(k)
    return np.einsum("tq,tqa,tqb->tab", geom.W, phi, phi), phi


def project_interior(geom: ElementGeometry, k: int, fvals):
    """Batched ``Q_0`` of values given at the volume quadrature points."""
    G, phi = interior_gram(geom, k)
    rhs = np.einsum("tq,tq,tqa->ta", geom.W, fvals, phi)
    return np.linalg.solve(G, rhs[..., None])[..., 0]


def project_exact(mesh, problem: ProblemSpec, config: DiscretizationConfig, layout=None, geom=None) -> np.ndarray:
    """Raw DOF vector of ``Q_h u`` with one-sided traces on interface edges."""
    if problem.u1 is None:
        raise MissingExactSolution(problem.name)
    layout = layout or build_dof_layout(mesh, config)
    geom = geom or ElementGeometry(mesh, config.volume_degree, config.n_edge_points)
    out = np.zeros(layout.n_raw)
    reg = np.broadcast_to(mesh.regions[:, None], geom.X.shape[:2])
    uq = problem.u(geom.X[..., 0], geom.X[..., 1], reg)
    c0 = project_interior(geom, config.k, uq)
    out[:layout.n_elements * layout.n_interior] = c0.ravel()
    nb, ell, npts = config.n_edge, config.ell_b, config.n_edge_points
    # region that owns the first block of each edge
    first = mesh.edge_elems[:, 0]
    owner = mesh.regions[first]
    iface = mesh.edge_kind == INTERFACE
    owner = np.where(iface, 1, owner)
    for reg_id, u in ((1, problem.u1), (2, problem.u2)):
        es = np.flatnonzero(owner == reg_id)
        if len(es):
            idx = layout.edge_offset[es][:, None] + np.arange(nb)[None, :]
            out[idx] = project_edges(mesh, es, u, ell, npts)
    es = np.flatnonzero(iface)
    if len(es):
        idx = layout.edge_offset[es][:, None] + nb + np.arange(nb)[None, :]
        out[idx] = project_edges(mesh, es, problem.u2, ell, npts)
    return out


# ------------------------------------------------------------------ norms

def _local(system, vec):
    return np.asarray(vec)[system.layout.elem_map]


def weighted_l2(system: LinearSystem, e) -> float:
    """``sqrt(sum_T a_T ||e0||_T^2)`` for a raw DOF vector ``e``."""
    geom, k = system.ops.geom, system.config.k
    G, _ = interior_gram(geom, k)
    e0 = _local(system, e)[:, :system.config.n_interior]
    return math.sqrt(max(0.0, float(np.einsum("t,ti,tij,tj->", system.a_T, e0, G, e0))))


def weighted_wg(system: LinearSystem, e) -> float:
    """``sqrt(sum_T a_T^2 ||grad_w e||_T^2)``."""
    el = _local(system, e)
    return math.sqrt(max(0.0, float(np.einsum("t,ti,tij,tj->", system.a_T ** 2, el, system.ops.K, el))))


def triple_bar_norm(system: LinearSystem, v) -> float:
    el = _local(system, v)
    A = system.ops.matrices(system.a_T)
    return math.sqrt(max(0.0, float(np.einsum("ti,tij,tj->", el, A, el))))


def edge_seminorm(system: LinearSystem, v) -> float:
    """``sqrt(sum_T h_T ||v_b||_{dT}^2)`` with each edge counted from every adjacent element."""
    cfg = system.config
    el = _local(system, v)[:, cfg.n_interior:].reshape(len(system.a_T), 3, cfg.n_edge)
    E = system.ops.E
    return math.sqrt(max(0.0, float(np.einsum("t,tjl,tjlm,tjm->", system.ops.geom.hT, el, E, el))))


def error_L2_weighted(sol: WgSolution, problem, mesh) -> float:
    """``||Q_0 u - u_0||_{0,a}``."""
    s = sol.system
    return weighted_l2(s, project_exact(mesh, problem, s.config, s.layout, s.ops.geom) - sol.coeffs)


def error_wg_weighted(sol: WgSolution, problem, mesh) -> float:
    """``||grad_w (Q_h u - u_h)||_{0,a^2}``."""
    s = sol.system
    return weighted_wg(s, project_exact(mesh, problem, s.config, s.layout, s.ops.geom) - sol.coeffs)


@dataclass
class ErrorReport:
    level: int
    ndof: int
    h: float
    errL2a: float
    errGrada2: float
    tripleBar: float
    edgeNorm: float
    solver_iterations: int = 0
    residual: float = 0.0


def error_report(mesh, problem, sol: WgSolution) -> ErrorReport:
    system = sol.system
    Qh = project_exact(mesh, problem, system.config, system.layout, system.ops.geom)
    e = Qh - sol.coeffs
    return ErrorReport(mesh.level, system.n_raw, mesh.h, weighted_l2(system, e), weighted_wg(system, e),
                       triple_bar_norm(system, e), edge_seminorm(system, e), sol.iterations, sol.residual)


# ------------------------------------------------------------------ rates

def rate(e0, e1, h0, h1) -> float:
    if e0 <= 0 or e1 <= 0:
        return float("nan")
    return math.log(e0 / e1) / math.log(h0 / h1)


@dataclass
class ConvergenceTable:
    reports: list
    rates: dict = field(default_factory=dict)  # norm name -> list (first entry nan)

    NORMS = ("errL2a", "errGrada2", "tripleBar", "edgeNorm")

    def final_rate(self, norm: str) -> float:
        return self.rates[norm][-1]

    def rows(self):
        for i, r in enumerate(self.reports):
            yield r, {n: self.rates[n][i] for n in self.NORMS}


def convergence_rates(reports, min_levels: int = 2) -> ConvergenceTable:
    reports = list(reports)
    if len(reports) < max(1, min_levels):
        raise ValueError(f"need at least {max(1, min_levels)} levels")
    rates = {}
    for n in ConvergenceTable.NORMS:
        vals = [float("nan")]
        for a, b in zip(reports[:-1], reports[1:]):
            vals.append(rate(getattr(a, n), getattr(b, n), a.h, b.h))
        rates[n] = vals
    return ConvergenceTable(reports, rates)


CSV_COLUMNS = ("level", "ndof", "h", "errL2a", "rateL2", "errGrada2", "rateGrad", "tripleBar", "edgeNorm")


def write_csv(table: ConvergenceTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r, rt in table.rows():
            w.writerow([r.level, r.ndof, f"{r.h:.17g}", f"{r.errL2a:.17g}", f"{rt['errL2a']:.6g}",
                        f"{r.errGrada2:.17g}", f"{rt['errGrada2']:.6g}", f"{r.tripleBar:.17g}", f"{r.edgeNorm:.17g}"])


def run_level(problem, config, level, method="sparse_lu", tol=1e-12, neumann="single"):
    mesh = generate_fitted_mesh(problem.domain, level)
    sol = solve(assemble(mesh, problem, config, neumann), method, tol)
    return mesh, sol, error_report(mesh, problem, sol)


def convergence_study(problem, config, levels, method="sparse_lu", tol=1e-12, neumann="single", progress=None):
    reports = []
    for lev in levels:
        _, _, rep = run_level(problem, config, lev, method, tol, neumann)
        reports.append(rep)
        if progress:
            progress(rep)
    return convergence_rates(reports)


# ------------------------------------------------------------------ identity diagnostics

@dataclass
class ErrorEquationReport:
    discrepancy: float  # max over free test functions of |a(e_h,v) - s(Q_h u,v) - l1 - l2|
    scale: float  # max |a(Q_h u, v)|, the size of the cancelling terms
    lhs: np.ndarray
    s_term: np.ndarray
    l1: np.ndarray
    l2: np.ndarray

    @property
    def relative(self) -> float:
        return self.discrepancy / self.scale if self.scale > 0 else self.discrepancy


def _reduce_to_free(system, local_vecs):
    """Sum per-element local vectors into raw DOFs, then onto free test functions."""
    raw = np.zeros(system.n_raw)
    np.add.at(raw, system.layout.elem_map, local_vecs)
    cons = system.constraints
    out = np.zeros(cons.n_free)
    m = cons.master >= 0
    np.add.at(out, cons.master[m], raw[m])
    return out


def check_error_equation(problem: ProblemSpec, mesh, config: DiscretizationConfig, sol: WgSolution) -> ErrorEquationReport:
    """Evaluate both sides of the error equation for every free test basis function."""
    if problem.grad1 is None:
        raise MissingExactSolution("exact gradient required")
    system = sol.system
    ops, geom = system.ops, system.ops.geom
    a_T = system.a_T
    nk, nb, r = config.n_interior, config.n_edge, config.r
    Qh = project_exact(mesh, problem, config, system.layout, geom)
    e_loc = (Qh - sol.coeffs)[system.layout.elem_map]
    q_loc = Qh[system.layout.elem_map]
    A = ops.matrices(a_T)
    lhs = _reduce_to_free(system, np.einsum("tij,tj->ti", A, e_loc))
    s_term = _reduce_to_free(system, np.einsum("tij,tj->ti", ops.S, q_loc))
    scale = float(np.abs(_reduce_to_free(system, np.einsum("tij,tj->ti", A, q_loc))).max())

    # Q_h grad u per element in the P_r basis
    reg = np.broadcast_to(mesh.regions[:, None], geom.X.shape[:2])
    gx, gy = problem.grad(geom.X[..., 0], geom.X[..., 1], reg)
    phi = geom.interior_values(r)
    px = np.linalg.solve(ops.M, np.einsum("tq,tq,tqa->ta", geom.W, gx, phi)[..., None])[..., 0]
    py = np.linalg.solve(ops.M, np.einsum("tq,tq,tqa->ta", geom.W, gy, phi)[..., None])[..., 0]

    EX, EW, EN = geom.EX, geom.EW, geom.EN
    ereg = np.broadcast_to(mesh.regions[:, None, None], EX.shape[:3])
    ux, uy = problem.grad(EX[..., 0], EX[..., 1], ereg)
    phi_r_e = geom.interior_values(r, EX)
    qx = np.einsum("tjqa,ta->tjq", phi_r_e, px)
    qy = np.einsum("tjqa,ta->tjq", phi_r_e, py)
    flux = a_T[:, None, None] * ((ux - qx) * EN[..., 0] + (uy - qy) * EN[..., 1])
    phi_k_e = geom.interior_values(config.k, EX)
    zeta = geom.edge_values(config.ell_b)
    l1 = np.zeros((len(a_T), config.n_local))
    l1[:, :nk] = np.einsum("tjq,tjq,tjqi->ti", EW, flux, phi_k_e)
    for j in range(3):
        l1[:, nk + j * nb:nk + (j + 1) * nb] = -np.einsum("tq,tq,tql->tl", EW[:, j], flux[:, j], zeta[:, j])

    # Q_b u - u on each element boundary, from the element's own side
    uvals = problem.u(EX[..., 0], EX[..., 1], ereg)
    cb = np.linalg.solve(ops.E, np.einsum("tjq,tjq,tjql->tjl", EW, uvals, zeta)[..., None])[..., 0]
    delta = np.einsum("tjql,tjl->tjq", zeta, cb) - uvals
    gwx = np.einsum("tjqm,tmi->tjqi", phi_r_e, ops.Gx)
    gwy = np.einsum("tjqm,tmi->tjqi", phi_r_e, ops.Gy)
    gwn = gwx * EN[..., 0, None] + gwy * EN[..., 1, None]
    l2 = a_T[:, None] * np.einsum("tjq,tjq,tjqi->ti", EW, delta, gwn)

    l1f, l2f = _reduce_to_free(system, l1), _reduce_to_free(system, l2)
    disc = float(np.abs(lhs - s_term - l1f - l2f).max()) if len(lhs) else 0.0
    return ErrorEquationReport(disc, scale, lhs, s_term, l1f, l2f)


def galerkin_residual(sol: WgSolution) -> tuple[float, float]:
    """``max |a(u_h, phi) - F(phi)|`` over free test functions, from local matrices; returns (residual, scale)."""
    system = sol.system
    A = system.ops.matrices(system.a_T)
    loc = np.einsum("tij,tj->ti", A, sol.coeffs[system.layout.elem_map])
    lhs = _reduce_to_free(system, loc)
    cons = system.constraints
    rhs = np.zeros(cons.n_free)
    m = cons.master >= 0
    np.add.at(rhs, cons.master[m], system.load[m])
    scale = float(max(np.abs(lhs).max(initial=0.0), np.abs(rhs).max(initial=0.0)))
    return float(np.abs(lhs - rhs).max(initial=0.0)), scale


def weak_gradient_residual(mesh, config: DiscretizationConfig, trials: int = 4, seed: int = 0) -> float:
    """Max relative residual of the weak-gradient definition on random local data.

    The right side ``-(v0, div psi)_T + <v_b, psi.n>_dT`` is re-evaluated on a
    finer, independent quadrature than the one that built the operator.
    """
    rng = np.random.default_rng(seed)
    ops = local_operators(mesh, config)
    fine = ElementGeometry(mesh, min(20, config.volume_degree + 6), config.n_edge_points + 8)
    nk, nb, r = config.n_interior, config.n_edge, config.r
    nT = mesh.n_elements
    worst = 0.0
    for _ in range(trials):
        v = rng.standard_normal((nT, config.n_local))
        cx, cy = rng.standard_normal((2, nT, ops.M.shape[1]))
        wx, wy = np.einsum("tmi,ti->tm", ops.Gx, v), np.einsum("tmi,ti->tm", ops.Gy, v)
        lhs = np.einsum("tm,tmn,tn->t", wx, ops.M, cx) + np.einsum("tm,tmn,tn->t", wy, ops.M, cy)
        _, dx, dy = fine.interior_gradients(r)
        div = np.einsum("tqm,tm->tq", dx, cx) + np.einsum("tqm,tm->tq", dy, cy)
        v0 = np.einsum("tqi,ti->tq", fine.interior_values(config.k), v[:, :nk])
        vol = -np.einsum("tq,tq,tq->t", fine.W, v0, div)
        pe = fine.interior_values(r, fine.EX)
        psin = np.einsum("tjqm,tm->tjq", pe, cx) * fine.EN[..., 0] + np.einsum("tjqm,tm->tjq", pe, cy) * fine.EN[..., 1]
        vb = np.einsum("tjql,tjl->tjq", fine.edge_values(config.ell_b), v[:, nk:].reshape(nT, 3, nb))
        rhs = vol + np.einsum("tjq,tjq,tjq->t", fine.EW, vb, psin)
        scale = np.abs(vol) + np.abs(rhs - vol) + 1e-300
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / scale)))
    return worst


def projection_residuals(mesh, config: DiscretizationConfig, f, grad) -> dict:
    """Relative orthogonality residuals of ``Q_0``, ``Q_b`` and the vector projection."""
    geom = ElementGeometry(mesh, config.volume_degree, config.n_edge_points)
    out = {}
    fq = f(geom.X[..., 0], geom.X[..., 1])
    phi = geom.interior_values(config.k)
    c0 = project_interior(geom, config.k, fq)
    res = fq - np.einsum("tqa,ta->tq", phi, c0)
    num = np.abs(np.einsum("tq,tq,tqa->ta", geom.W, res, phi))
    den = np.einsum("tq,tq,tqa->ta", geom.W, np.abs(fq), np.abs(phi)) + 1e-300
    out["Q0"] = float((num / den).max())

    edges = np.arange(mesh.n_edges)
    cb = project_edges(mesh, edges, f, config.ell_b, config.n_edge_points)
    X, W, s = _edge_points(mesh, edges, config.n_edge_points)
    Z = legendre_values(s, config.ell_b)
    fe = f(X[..., 0], X[..., 1])
    res = fe - cb @ Z.T
    num = np.abs(np.einsum("eq,eq,ql->el", W, res, Z))
    den = np.einsum("eq,eq,ql->el", W, np.abs(fe), np.abs(Z)) + 1e-300
    out["Qb"] = float((num / den).max())

    gx, gy = grad(geom.X[..., 0], geom.X[..., 1])
    phir = geom.interior_values(config.r)
    worst = 0.0
    for comp in (gx, gy):
        c = project_interior(geom, config.r, comp)
        res = comp - np.einsum("tqa,ta->tq", phir, c)
        num = np.abs(np.einsum("tq,tq,tqa->ta", geom.W, res, phir))
        den = np.einsum("tq,tq,tqa->ta", geom.W, np.abs(comp), np.abs(phir)) + 1e-300
        worst = max(worst, float((num / den).max()))
    out["Qh"] = worst
    return out


def kernel_check(mesh, config: DiscretizationConfig, mu: float = 1.0) -> float:
    """Smallest eigenvalue of the energy form on the homogeneous test space (dense, small meshes)."""
    zero = ProblemSpec("zero", None, mu, 1.0, *(lambda x, y: np.zeros_like(x),) * 2,
                       *(lambda x, y: (np.zeros_like(x), np.zeros_like(x)),) * 2,
                       *(lambda x, y: np.zeros_like(x),) * 2)
    return smallest_eigenvalue(assemble(mesh, zero, config))
