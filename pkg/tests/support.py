"""Small hand-built meshes and polynomial problems shared by the tests."""
import numpy as np

from wgcurve.meshgen import build_mesh
from wgcurve.problems import ProblemSpec


def zero(x, y, *rest):
    return np.zeros_like(np.asarray(x, float))


def reference_triangle():
    return build_mesh([(0, 0), (1, 0), (0, 1)], [(0, 1, 2)], [1])


def two_triangle_square():
    return build_mesh([(0, 0), (1, 0), (1, 1), (0, 1)], [(0, 1, 2), (0, 2, 3)], [1, 1])


def grid_mesh(n=4, lo=-1.0, hi=1.0, split=None, box=None):
    """Structured right-triangle mesh of a square.

    Region 1 is the elements left of ``split``, or those whose centroid lies in
    the centred square of half-width ``box``.
    """
    s = np.linspace(lo, hi, n + 1)
    V = [(x, y) for y in s for x in s]
    T, R = [], []
    for j in range(n):
        for i in range(n):
            a, b = j * (n + 1) + i, j * (n + 1) + i + 1
            c, d = b + n + 1, a + n + 1
            for tri in ((a, b, c), (a, c, d)):
                T.append(tri)
                cx = np.mean([V[v][0] for v in tri])
                cy = np.mean([V[v][1] for v in tri])
                if box is not None:
                    R.append(1 if max(abs(cx), abs(cy)) < box else 2)
                else:
                    R.append(1 if split is None or cx < split else 2)
    return build_mesh(V, T, R)


def poly_problem(k, a1=1.0, a2=1.0):
    """Exact solution in ``P_k`` with ``-div(a grad u) = f`` and no jumps (requires a1 == a2)."""
    if k == 1:
        u = lambda x, y: 1.0 + 2.0 * x + 3.0 * y
        g = lambda x, y: (np.full_like(np.asarray(x, float), 2.0), np.full_like(np.asarray(x, float), 3.0))
        lap = 0.0
    elif k == 2:
        u = lambda x, y: x * x + 2.0 * y * y + x * y - x
        g = lambda x, y: (2.0 * x + y - 1.0, 4.0 * y + x)
        lap = 6.0
    else:
        u = lambda x, y: x ** 3 - 3.0 * x * y * y + y * y
        g = lambda x, y: (3.0 * x * x - 3.0 * y * y, -6.0 * x * y + 2.0 * y)
        lap = 2.0
    f = lambda x, y: np.full_like(np.asarray(x, float), -a1 * lap)
    return ProblemSpec(f"poly{k}", None, a1, a2, u, u, g, g, f, f)


def zero_problem(mu=1.0):
    zg = lambda x, y: (zero(x, y), zero(x, y))
    return ProblemSpec("zero", None, mu, 1.0, zero, zero, zg, zg, zero, zero)


def jump_poly_problem(k, a1=2.0, a2=1.0):
    """``u_i = p / a_i`` with ``p`` from :func:`poly_problem`: flux continuous, value jump ``p (1/a1 - 1/a2)``."""
    base = poly_problem(k)
    sc = lambda c, fn: (lambda x, y: fn(x, y) / c)
    gsc = lambda c: (lambda x, y: tuple(v / c for v in base.grad1(x, y)))
    return ProblemSpec(f"jump{k}", None, a1, a2, sc(a1, base.u1), sc(a2, base.u1), gsc(a1), gsc(a2),
                       base.f1, base.f1, gD=lambda x, y: base.u1(x, y) * (1.0 / a1 - 1.0 / a2))
