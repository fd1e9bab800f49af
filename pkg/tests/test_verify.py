import csv
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from support import grid_mesh, jump_poly_problem, zero_problem
from wgcurve.meshgen import build_mesh
from wgcurve.system import FIXED, WgSolution, assemble, solve
from wgcurve.verify import (CSV_COLUMNS, ErrorReport, MissingExactSolution, check_error_equation, convergence_rates,
                            edge_seminorm, error_L2_weighted, error_report, error_wg_weighted, example1, example2,
                            interior_gram, kernel_check, manufactured_jump, project_exact, projection_residuals, rate,
                            triple_bar_norm, weighted_l2, weighted_wg, write_csv)
from wgcurve.wg_operator import DiscretizationConfig

STD1, SUP1 = DiscretizationConfig(1, "standard"), DiscretizationConfig(1, "super")
FD_STEP = 1e-6


def random_points(rng, n, rmin, rmax):
    r = rng.uniform(rmin, rmax, n)
    th = rng.uniform(0, 2 * np.pi, n)
    return r * np.cos(th), r * np.sin(th)


# ------------------------------------------------------------------ problem data

def test_example1_values():
    p = example1(1.0)
    assert p.u1(0.0, 0.0) == 2.0
    th = np.linspace(0, 2 * np.pi, 13)
    for mu in (1e-4, 1.0, 1e4):
        p = example1(mu)
        assert np.allclose(p.u1(np.cos(th), np.sin(th)), 1.0, rtol=1e-12)
        assert np.allclose(p.u2(np.cos(th), np.sin(th)), 1.0, rtol=1e-12)
    assert p.g(2.0, 0.0) == 2.0 - 64.0
    assert (p.a1, p.a2) == (1e4, 1.0)


def test_example2_values():
    th = np.linspace(0, 2 * np.pi, 17)
    r = 3.0 - np.cos(4 * th)
    x, y = r * np.cos(th), r * np.sin(th)
    for mu in (1e-2, 1.0, 1e2):
        p = example2(mu)
        assert np.allclose(p.u1(x, y), 0.0, atol=1e-11)
        assert np.allclose(p.u2(x, y), 0.0, atol=1e-11)
    assert p.f1(1.0, 0.0) == pytest.approx(23.0, abs=1e-14)
    assert p.f2(0.0, -1.0) == pytest.approx(23.0, abs=1e-14)


@pytest.mark.parametrize("factory", [example1, example2, manufactured_jump])
def test_nonpositive_mu_rejected(factory):
    for mu in (0.0, -1.0):
        with pytest.raises(ValueError):
            factory(mu)


def test_manufactured_jump_data():
    p = manufactured_jump(10.0)
    assert p.gD(1.0, 0.0) == pytest.approx(math.sin(1.0) + 5.0, abs=1e-15)
    rng = np.random.default_rng(3)
    th = rng.uniform(0, 2 * np.pi, 20)
    x, y = np.cos(th), np.sin(th)
    n1 = (x, y)
    (ax, ay), (bx, by) = p.grad1(x, y), p.grad2(x, y)
    # a1 grad u1 . n1 + a2 grad u2 . n2 with n2 = -n1
    both = p.a1 * (ax * n1[0] + ay * n1[1]) + p.a2 * (bx * -n1[0] + by * -n1[1])
    assert np.allclose(p.gN(x, y, *n1), both, rtol=1e-14)


def fd_grad(u, x, y):
    return ((u(x + FD_STEP, y) - u(x - FD_STEP, y)) / (2 * FD_STEP),
            (u(x, y + FD_STEP) - u(x, y - FD_STEP)) / (2 * FD_STEP))


@pytest.mark.parametrize("factory,rin,rout", [(example1, (0.1, 0.95), (1.05, 1.9)),
                                               (example2, (0.1, 1.9), (4.1, 5.0)),
                                               (manufactured_jump, (0.1, 0.95), (1.05, 1.9))])
@pytest.mark.parametrize("mu", [1e-2, 1.0, 1e2])
def test_closed_forms_against_finite_differences(factory, rin, rout, mu):
    p = factory(mu)
    rng = np.random.default_rng(7)
    for (lo, hi), a, u, grad, f in ((rin, p.a1, p.u1, p.grad1, p.f1), (rout, p.a2, p.u2, p.grad2, p.f2)):
        x, y = random_points(rng, 20, lo, hi)
        gx, gy = grad(x, y)
        fx, fy = fd_grad(u, x, y)
        scale = np.abs(np.concatenate([gx, gy])).max()
        assert np.abs(np.concatenate([gx - fx, gy - fy])).max() <= 1e-7 * scale
        # -div(a grad u) from differences of the closed-form gradient
        dxx = (grad(x + FD_STEP, y)[0] - grad(x - FD_STEP, y)[0]) / (2 * FD_STEP)
        dyy = (grad(x, y + FD_STEP)[1] - grad(x, y - FD_STEP)[1]) / (2 * FD_STEP)
        fv = f(x, y)
        assert np.abs(-a * (dxx + dyy) - fv).max() <= 1e-7 * max(np.abs(fv).max(), a * np.abs(dxx).max())


def test_example_sources_analytic():
    # div(6 r^4 (x, y)) = 36 r^4 and -Laplacian(r^5 - 3 r^4 + r^4 cos 4t) = 48 r^2 - 25 r^3
    x, y = random_points(np.random.default_rng(0), 20, 0.2, 1.8)
    r = np.hypot(x, y)
    assert np.allclose(example1(1.0).f1(x, y), 36 * r ** 4, rtol=1e-14)
    assert np.allclose(example2(1.0).f2(x, y), 48 * r ** 2 - 25 * r ** 3, rtol=1e-13)


# ------------------------------------------------------------------ norms

def exact_solution(mesh, problem, config):
    system = assemble(mesh, problem, config)
    q = project_exact(mesh, problem, config, system.layout, system.ops.geom)
    return WgSolution(q, q[system.constraints.free_dofs], "exact", 0, 0.0, system), system


@pytest.mark.parametrize("config", [STD1, SUP1], ids=str)
def test_norms_vanish_at_projection(circle0, config):
    p = manufactured_jump(10.0)
    sol, system = exact_solution(circle0, p, config)
    assert error_L2_weighted(sol, p, circle0) == 0.0
    assert error_wg_weighted(sol, p, circle0) == 0.0
    rep = error_report(circle0, p, sol)
    assert (rep.errL2a, rep.errGrada2, rep.tripleBar, rep.edgeNorm) == (0.0, 0.0, 0.0, 0.0)
    zero = np.zeros(system.n_raw)
    assert triple_bar_norm(system, zero) == 0.0 and edge_seminorm(system, zero) == 0.0


def test_unit_weight_is_plain_l2(circle1):
    p = example1(1.0)
    sol = solve(assemble(circle1, p, SUP1), "sparse_lu")
    s = sol.system
    e = project_exact(circle1, p, SUP1, s.layout, s.ops.geom) - sol.coeffs
    # plain L2 of the interior error function at quadrature points
    phi = s.ops.geom.interior_values(1)
    vals = np.einsum("tqa,ta->tq", phi, e[s.layout.elem_map][:, :SUP1.n_interior])
    plain = math.sqrt(float(np.sum(s.ops.geom.W * vals ** 2)))
    assert weighted_l2(s, e) == pytest.approx(plain, rel=1e-14)
    # with a1 = 4 the region-1 part is weighted by 4
    s4 = assemble(circle1, example1(4.0), SUP1)
    G, _ = interior_gram(s4.ops.geom, 1)
    e0 = e[s.layout.elem_map][:, :SUP1.n_interior]
    per = np.einsum("ti,tij,tj->t", e0, G, e0)
    expect = math.sqrt(float(np.sum(np.where(circle1.regions == 1, 4.0, 1.0) * per)))
    assert weighted_l2(s4, e) == pytest.approx(expect, rel=1e-13)


def test_weighted_gradient_uses_squared_coefficient(circle0):
    s1 = assemble(circle0, example1(1.0), SUP1)
    s3 = assemble(circle0, example1(3.0), SUP1)
    v = np.zeros(s1.n_raw)
    inside = np.flatnonzero(circle0.regions == 1)
    v[s1.layout.elem_map[inside, 1]] = 1.0  # a linear interior mode inside only
    assert weighted_wg(s3, v) == pytest.approx(3.0 * weighted_wg(s1, v), rel=1e-13)


def test_edge_seminorm_single_edge():
    h = math.sqrt(3) / 2
    mesh = build_mesh([(0, 0), (1, 0), (0.5, h), (0.5, -h)], [(0, 1, 2), (1, 0, 3)], [1, 1])
    assert np.allclose(mesh.element_diameters, 1.0)
    s = assemble(mesh, zero_problem(), STD1)
    shared = int(np.flatnonzero((mesh.edge_elems >= 0).all(axis=1))[0])
    v = np.zeros(s.n_raw)
    v[s.layout.edge(shared)] = 1.0
    assert edge_seminorm(s, v) == pytest.approx(math.sqrt(2.0), rel=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_triple_bar_positive_on_homogeneous_space(seed):
    from wgcurve.meshgen import circle_domain, generate_fitted_mesh
    mesh = generate_fitted_mesh(circle_domain(), 0)
    s = assemble(mesh, zero_problem(), STD1)
    x = np.random.default_rng(seed).normal(size=s.n_free)
    v = s.constraints.expand(x)
    assert np.all(v[s.constraints.status == FIXED] == 0.0)
    assert triple_bar_norm(s, v) ** 2 == pytest.approx(float(x @ (s.K @ x)), rel=1e-10)
    assert triple_bar_norm(s, v) > 0.0


def test_missing_exact_solution(circle0):
    p = replace(example1(1.0), u1=None)
    with pytest.raises(MissingExactSolution):
        project_exact(circle0, p, STD1)


# ------------------------------------------------------------------ rates and tables

def report(level, h, err):
    return ErrorReport(level, 10 * (level + 1), h, err, err, err, err)


def test_rate_examples():
    assert rate(1.0, 1.0 / 16, 1.0, 0.5) == pytest.approx(4.0, abs=1e-14)
    assert rate(1.0, 1.0, 1.0, 0.5) == 0.0
    assert math.isnan(rate(1.0, 0.0, 1.0, 0.5))
    t = convergence_rates([report(0, 1.0, 1.0), report(1, 0.5, 1.0 / 16)])
    assert math.isnan(t.rates["errL2a"][0])
    assert t.final_rate("errGrada2") == pytest.approx(4.0)


def test_rates_use_measured_h():
    t = convergence_rates([report(0, 1.0, 1.0), report(1, 0.52, 0.52 ** 3)])
    assert t.final_rate("errL2a") == pytest.approx(3.0, abs=1e-12)


def test_rates_need_two_levels():
    with pytest.raises(ValueError):
        convergence_rates([report(0, 1.0, 1.0)])
    assert len(convergence_rates([report(0, 1.0, 1.0)], min_levels=1).reports) == 1


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-12, 1e3), st.floats(0.5, 6.0), st.floats(0.3, 0.7))
def test_rate_property(e0, p, q):
    assert rate(e0, e0 * q ** p, 1.0, q) == pytest.approx(p, rel=1e-9)


def test_csv_round_trip(tmp_path):
    reps = [report(i, 2.0 ** -i, 3.0 * 4.0 ** -i) for i in range(3)]
    t = convergence_rates(reps)
    path = tmp_path / "t.csv"
    write_csv(t, path)
    rows = list(csv.reader(path.open()))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 4
    for rep, row in zip(reps, rows[1:]):
        d = dict(zip(CSV_COLUMNS, row))
        assert int(d["level"]) == rep.level and float(d["errL2a"]) == rep.errL2a and float(d["h"]) == rep.h
    assert rows[1][4] == "nan"
    assert float(rows[3][4]) == pytest.approx(2.0)


# ------------------------------------------------------------------ identities

@pytest.mark.parametrize("config", [STD1, SUP1, DiscretizationConfig(2, "standard"), DiscretizationConfig(2, "super")],
                         ids=str)
def test_error_equation_straight_polynomial(config):
    mesh = grid_mesh(4, box=0.5)
    p = jump_poly_problem(config.k, a1=2.0, a2=1.0)
    sol = solve(assemble(mesh, p, config), "dense_cholesky")
    rep = check_error_equation(p, mesh, config, sol)
    # data are O(1), so an absolute bound is meaningful; a(Q_h u, v) itself can vanish for k = 1
    for part in (rep.lhs, rep.s_term, rep.l1, rep.l2):
        assert np.abs(part).max() <= 1e-10


@pytest.mark.parametrize("config", [STD1, SUP1], ids=str)
def test_error_equation_curved(circle0, circle1, config):
    # u varies along the interface, so the curved-edge trace term is live
    p = manufactured_jump(10.0)
    rel = []
    for mesh in (circle0, circle1):
        sol = solve(assemble(mesh, p, config), "sparse_lu")
        rep = check_error_equation(p, mesh, config, sol)
        assert np.abs(rep.lhs).max() > 1e3 * rep.discrepancy
        rel.append(rep.relative)
    # an identity, so both levels sit at round-off rather than decaying like h^k
    assert max(rel) <= 1e-9
    assert np.abs(rep.l2).max() > 1e-6 * rep.scale


def test_l2_term_vanishes_without_curved_edges():
    mesh = grid_mesh(4, box=0.5)
    p = example1(3.0)
    p = replace(p, domain=None)
    sol = solve(assemble(mesh, p, SUP1), "dense_cholesky")
    rep = check_error_equation(p, mesh, SUP1, sol)
    assert np.abs(rep.l2).max() <= 1e-12 * rep.scale
    assert rep.relative <= 1e-9


@pytest.mark.parametrize("config", [STD1, SUP1, DiscretizationConfig(3, "super")], ids=str)
def test_projection_residuals(circle1, flower0, config):
    f = lambda x, y: np.sin(x) * np.exp(0.3 * y)
    grad = lambda x, y: (np.cos(x) * np.exp(0.3 * y), 0.3 * np.sin(x) * np.exp(0.3 * y))
    for mesh in (circle1, flower0):
        res = projection_residuals(mesh, config, f, grad)
        assert max(res.values()) <= 1e-11


@pytest.mark.parametrize("config", [STD1, SUP1], ids=str)
def test_kernel_check(circle0, config):
    assert kernel_check(circle0, config, mu=1e-3) > 0.0
