"""Parametric curves and edge charts.

A chart maps the edge parameter ``t`` in ``[0, |e|]`` onto a (possibly
curved) edge by an affine rescaling of the curve's native parameter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

TWO_PI = 2.0 * math.pi


class CurveDomainError(ValueError):
    """Parameter outside a curve's interval, or a degenerate arc."""


class DegenerateCurveError(ValueError):
    pass


class ArcLengthAccuracyError(RuntimeError):
    pass


def _check_param(t, lo, hi):
    t_arr = np.asarray(t, dtype=float)
    slack = 1e-12 * max(1.0, abs(lo), abs(hi))
    if np.any(t_arr < lo - slack) or np.any(t_arr > hi + slack) or not np.all(np.isfinite(t_arr)):
        raise CurveDomainError(f"parameter {t!r} outside [{lo}, {hi}]")
    return t_arr


@dataclass(frozen=True)
class Segment:
    """Straight segment ``p0 + t (p1 - p0)`` for ``t`` in ``[0, 1]``."""

    p0: tuple[float, float]
    p1: tuple[float, float]

    @property
    def interval(self):
        return (0.0, 1.0)

    closed = False

    def __post_init__(self):
        if self.p0 == self.p1:
            raise DegenerateCurveError("segment endpoints coincide")

    def eval(self, t):
        t = _check_param(t, *self.interval)
        p0, p1 = np.asarray(self.p0), np.asarray(self.p1)
        return p0 + t[..., None] * (p1 - p0)

    def deriv(self, t):
        t = _check_param(t, *self.interval)
        d = np.asarray(self.p1, float) - np.asarray(self.p0, float)
        return np.broadcast_to(d, t.shape + (2,)).copy()

    def to_text(self):
        return "segment " + " ".join(repr(float(v)) for v in (*self.p0, *self.p1))


@dataclass(frozen=True)
class PolarStar:
    """Star-shaped closed curve ``r(theta) = c0 + sum_n c_n cos(n theta)``.

    The parameter is the polar angle about ``center``. Closed curves accept
    parameters in ``[-2 pi, 2 pi]`` so arcs may straddle ``theta = 0``.
    """

    coeffs: tuple[float, ...]
    center: tuple[float, float] = (0.0, 0.0)

    closed = True

    @property
    def interval(self):
        return (-TWO_PI, TWO_PI)

    def __post_init__(self):
        if len(self.coeffs) == 0:
            raise ValueError("empty radius series")
        # a cosine series is bounded below by c0 - sum |c_n|; sample finely otherwise
        theta = np.linspace(0.0, TWO_PI, 4097)
        if np.min(self.radius(theta)) <= 0.0:
            raise DegenerateCurveError("r(theta) must stay positive")

    def radius(self, theta):
        theta = np.asarray(theta, dtype=float)
        r = np.full(theta.shape, float(self.coeffs[0]))
        for n, c in enumerate(self.coeffs[1:], start=1):
            if c != 0.0:
                r = r + c * np.cos(n * theta)
        return r

    def radius_deriv(self, theta):
        theta = np.asarray(theta, dtype=float)
        dr = np.zeros(theta.shape)
        for n, c in enumerate(self.coeffs[1:], start=1):
            if c != 0.0:
                dr = dr - n * c * np.sin(n * theta)
        return dr

    def radius_deriv2(self, theta):
        theta = np.asarray(theta, dtype=float)
        d2 = np.zeros(theta.shape)
        for n, c in enumerate(self.coeffs[1:], start=1):
            if c != 0.0:
                d2 = d2 - n * n * c * np.cos(n * theta)
        return d2

    def curvature(self, theta):
        """Signed curvature, positive where the curve is convex."""
        r, d1, d2 = self.radius(theta), self.radius_deriv(theta), self.radius_deriv2(theta)
        return (r * r + 2 * d1 * d1 - r * d2) / (r * r + d1 * d1) ** 1.5

    def eval(self, t):
        t = _check_param(t, *self.interval)
        r = self.radius(t)
        return np.stack([self.center[0] + r * np.cos(t), self.center[1] + r * np.sin(t)], axis=-1)

    def deriv(self, t):
        t = _check_param(t, *self.interval)
        r, dr = self.radius(t), self.radius_deriv(t)
        c, s = np.cos(t), np.sin(t)
        return np.stack([dr * c - r * s, dr * s + r * c], axis=-1)

    def contains(self, x, y):
        """True for points strictly inside the curve."""
        dx = np.asarray(x, float) - self.center[0]
        dy = np.asarray(y, float) - self.center[1]
        return np.hypot(dx, dy) < self.radius(np.arctan2(dy, dx))

    def to_text(self):
        parts = ["polar", repr(float(self.center[0])), repr(float(self.center[1])), repr(float(self.coeffs[0]))]
        for n, c in enumerate(self.coeffs[1:], start=1):
            if c != 0.0:
                parts += [str(n), repr(float(c))]
        return " ".join(parts)


def Circle(center, radius):
    """Circle as the constant-radius star curve."""
    if radius <= 0:
        raise DegenerateCurveError("radius must be positive")
    return PolarStar((float(radius),), (float(center[0]), float(center[1])))


def flower(c0=3.0, amplitude=-1.0, petals=4, center=(0.0, 0.0)):
    coeffs = [0.0] * (petals + 1)
    coeffs[0] = c0
    coeffs[petals] = amplitude
    return PolarStar(tuple(coeffs), center)


def parse_curve(line: str):
    """Parse ``circle cx cy r``, ``polar cx cy c0 n1 c1 ...`` or ``segment x0 y0 x1 y1``."""
    tok = line.split()
    kind, vals = tok[0], tok[1:]
    if kind == "circle":
        cx, cy, r = map(float, vals)
        return Circle((cx, cy), r)
    if kind == "segment":
        x0, y0, x1, y1 = map(float, vals)
        return Segment((x0, y0), (x1, y1))
    if kind == "polar":
        cx, cy, c0 = map(float, vals[:3])
        rest = vals[3:]
        if len(rest) % 2:
            raise ValueError(f"bad polar record: {line!r}")
        pairs = {int(rest[i]): float(rest[i + 1]) for i in range(0, len(rest), 2)}
        nmax = max(pairs, default=0)
        coeffs = [c0] + [pairs.get(n, 0.0) for n in range(1, nmax + 1)]
        return PolarStar(tuple(coeffs), (cx, cy))
    raise ValueError(f"unknown curve kind {kind!r}")


def curve_to_text(curve) -> str:
    if isinstance(curve, PolarStar) and len(curve.coeffs) == 1:
        return "circle {!r} {!r} {!r}".format(float(curve.center[0]), float(curve.center[1]), float(curve.coeffs[0]))
    return curve.to_text()


def curve_eval(curve, t):
    return curve.eval(t)


def curve_derivative(curve, t):
    d = curve.deriv(t)
    if np.any(np.hypot(d[..., 0], d[..., 1]) == 0.0):
        raise DegenerateCurveError(f"zero tangent at t={t!r}")
    return d


@lru_cache(maxsize=None)
def _gauss7():
    x, w = np.polynomial.legendre.leggauss(7)
    return x, w


def arc_length(curve, a: float, b: float, tol: float = 1e-12, max_depth: int = 40) -> float:
    """Arclength of ``curve`` over ``[a, b]`` by adaptive 7-point Gauss bisection."""
    if not a < b:
        raise CurveDomainError(f"need a < b, got [{a}, {b}]")
    if tol <= 0:
        raise ValueError("tol must be positive")
    _check_param(np.array([a, b]), *curve.interval)
    x, w = _gauss7()

    def speed_integral(lo, hi):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        d = curve.deriv(mid + half * x)
        return half * float(np.dot(w, np.hypot(d[:, 0], d[:, 1])))

    total = 0.0
    stack = [(a, b, speed_integral(a, b), 0)]
    while stack:
        lo, hi, whole, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        left, right = speed_integral(lo, mid), speed_integral(mid, hi)
        err = abs(left + right - whole)
        local_tol = tol * (hi - lo) / (b - a) * (1.0 + abs(whole))
        if err <= local_tol:
            total += left + right
        elif depth >= max_depth:
            raise ArcLengthAccuracyError(f"arclength did not converge on [{lo}, {hi}]")
        else:
            stack.append((mid, hi, right, depth + 1))
            stack.append((lo, mid, left, depth + 1))
    return total


@dataclass(frozen=True)
class EdgeChart:
    """Edge map over ``t`` in ``[0, length]``: native parameter ``a + (b - a) t / length``."""

    curve: object
    a: float
    b: float
    length: float = field(default=0.0)

    @property
    def straight(self) -> bool:
        return isinstance(self.curve, Segment)

    def native(self, t):
        return self.a + (self.b - self.a) * (np.asarray(t, float) / self.length)

    def eval(self, t):
        return self.curve.eval(self.native(t))

    def eval_fraction(self, s):
        """Point at fraction ``s`` in ``[0, 1]`` of the edge parameter."""
        return self.curve.eval(self.a + (self.b - self.a) * np.asarray(s, float))

    def tangent(self, t):
        """``dF/dt``; its norm is the Jacobian."""
        return self.curve.deriv(self.native(t)) * ((self.b - self.a) / self.length)

    def tangent_fraction(self, s):
        """Derivative with respect to the fraction ``s`` (``length`` times ``tangent``)."""
        return self.curve.deriv(self.a + (self.b - self.a) * np.asarray(s, float)) * (self.b - self.a)

    def jacobian(self, t):
        d = self.tangent(t)
        return np.hypot(d[..., 0], d[..., 1])

    @property
    def endpoints(self):
        return self.curve.eval(np.array([self.a, self.b]))


def build_edge_chart(curve, a: float, b: float, tol: float = 1e-12) -> EdgeChart:
    if isinstance(curve, Segment):
        # affine arclength parametrization: J == 1 exactly
        p0, p1 = curve.eval(np.array([a, b]))
        length = float(np.hypot(*(p1 - p0)))
    else:
        length = arc_length(curve, a, b, tol) if a < b else 0.0
    if not length > 0.0:
        raise CurveDomainError(f"degenerate arc [{a}, {b}]")
    return EdgeChart(curve, float(a), float(b), length)


def segment_chart(p0, p1) -> EdgeChart:
    seg = Segment((float(p0[0]), float(p0[1])), (float(p1[0]), float(p1[1])))
    return build_edge_chart(seg, 0.0, 1.0)


LEFT, RIGHT = 1, -1


def chart_normal(chart: EdgeChart, t, side: int = LEFT):
    """Unit normal pointing out of the element lying on ``side`` of the chart direction.

    ``side=LEFT`` means the element sits to the left of the direction of
    increasing ``t`` (the chart runs counterclockwise around it).
    """
    d = chart.tangent(t)
    nrm = np.hypot(d[..., 0], d[..., 1])
    n = np.stack([d[..., 1] / nrm, -d[..., 0] / nrm], axis=-1)
    return n if side == LEFT else -n
