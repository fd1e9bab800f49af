import math

import numpy as np
import pytest

from support import reference_triangle, two_triangle_square
from wgcurve.curves import Circle
from wgcurve.meshgen import (BOUNDARY, INTERFACE, DomainSpec, MeshFormatError, build_mesh, circle_domain,
                             flower_domain, generate_fitted_mesh, mesh_statistics, read_mesh, validate_mesh,
                             write_mesh)
from wgcurve.quadrature import integrate_element

DOMAINS = {"circle": circle_domain(), "flower": flower_domain()}
MIN_ANGLE = 15.0


def interface_vertices(mesh):
    ids = np.unique(mesh.edges[mesh.edge_kind == INTERFACE])
    return mesh.vertices[ids]


def test_circle_level0_interface():
    m = generate_fitted_mesh(circle_domain(8), 0)
    iface = np.flatnonzero(m.edge_kind == INTERFACE)
    assert len(iface) == 8
    for e in iface:
        ch = m.edge_chart(e)
        pts = ch.eval(np.array([0.0, 0.5 * ch.length, ch.length]))
        assert np.allclose(np.hypot(pts[:, 0], pts[:, 1]), 1.0, rtol=0, atol=1e-12)


def test_flower_region_tags(flower0):
    curve = flower_domain().interface
    for t in range(flower0.n_elements):
        area = integrate_element(flower0, t, lambda x, y: np.ones_like(x), 8)
        cx = integrate_element(flower0, t, lambda x, y: x, 8) / area
        cy = integrate_element(flower0, t, lambda x, y: y, 8) / area
        inside = math.hypot(cx, cy) < 3.0 - math.cos(4.0 * math.atan2(cy, cx))
        assert inside == (flower0.regions[t] == 1)
        assert bool(curve.contains(cx, cy)) == inside


@pytest.mark.parametrize("name", ["circle", "flower"])
def test_refinement_doubles_interface(name):
    d = DOMAINS[name]
    counts = [int(np.sum(generate_fitted_mesh(d, l).edge_kind == INTERFACE)) for l in range(3)]
    assert counts == [d.n0, 2 * d.n0, 4 * d.n0]


@pytest.mark.parametrize("name", ["circle", "flower"])
def test_determinism(name):
    a = generate_fitted_mesh(DOMAINS[name], 1)
    b = generate_fitted_mesh(DOMAINS[name], 1)
    for attr in ("vertices", "triangles", "regions", "edges", "edge_kind", "edge_elems", "edge_param"):
        assert np.array_equal(getattr(a, attr), getattr(b, attr))


@pytest.mark.parametrize("name", ["circle", "flower"])
def test_interface_nesting(name):
    coarse = interface_vertices(generate_fitted_mesh(DOMAINS[name], 1))
    fine = interface_vertices(generate_fitted_mesh(DOMAINS[name], 2))
    d = np.linalg.norm(coarse[:, None, :] - fine[None, :, :], axis=2).min(axis=1)
    assert d.max() <= 1e-12


@pytest.mark.parametrize("name", ["circle", "flower"])
def test_quality_and_h_ratio(name):
    hs = []
    for level in range(6):
        m = generate_fitted_mesh(DOMAINS[name], level)
        rep = validate_mesh(m)
        assert rep.ok, rep.checks
        assert rep.min_angle_deg >= MIN_ANGLE
        hs.append(rep.h)
    ratios = np.array(hs[1:]) / np.array(hs[:-1])
    assert np.all((ratios >= 0.45) & (ratios <= 0.55)), ratios


def test_validate_flags_clockwise_triangle():
    m = build_mesh([(0, 0), (1, 0), (0, 1)], [(0, 2, 1)], [1])
    rep = validate_mesh(m)
    assert not rep.checks["ccw_positive_area"]
    assert not rep.ok


def test_validate_flags_bad_interface():
    m = two_triangle_square()
    assert validate_mesh(m).ok
    diag = int(np.flatnonzero(m.edge_kind != BOUNDARY)[0])
    m.edge_kind[diag] = INTERFACE
    assert not validate_mesh(m).checks["edge_classification"]


def test_statistics_right_triangle():
    h, counts = mesh_statistics(reference_triangle())
    assert h == pytest.approx(math.sqrt(2.0))
    assert counts == {"boundary": 3, "interior": 0, "interface": 0}


@pytest.mark.parametrize("level", [0, 1, 2])
def test_statistics_euler(level):
    m = generate_fitted_mesh(circle_domain(), level)
    h, counts = mesh_statistics(m)
    assert m.n_vertices - sum(counts.values()) + m.n_elements == 1
    assert h == m.element_diameters.max()


def test_domain_spec_rejects_bad_input():
    with pytest.raises(ValueError):
        DomainSpec(-2, 2, -2, 2, Circle((0, 0), 1.0), n0=6)
    with pytest.raises(ValueError):
        DomainSpec(-1, 1, -1, 1, Circle((0, 0), 1.0))


def test_negative_level():
    with pytest.raises(ValueError):
        generate_fitted_mesh(circle_domain(), -1)


def test_text_round_trip(tmp_path, flower0):
    p = tmp_path / "m.txt"
    write_mesh(flower0, p)
    back = read_mesh(p)
    for attr in ("vertices", "triangles", "regions", "edges", "edge_kind", "edge_param", "edge_curve"):
        assert np.array_equal(getattr(back, attr), getattr(flower0, attr))
    assert back.level == flower0.level
    assert back.curves == flower0.curves
    write_mesh(back, tmp_path / "again.txt")
    assert (tmp_path / "again.txt").read_bytes() == p.read_bytes()


def test_read_rejects_missing_header(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("v 0 0\n")
    with pytest.raises(MeshFormatError):
        read_mesh(p)
