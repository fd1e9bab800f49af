"""Interface model problems with closed-form solutions.

``-div(a grad u) = f`` in each subdomain, ``u = g`` on the outer boundary,
``[[u]] = u1 - u2 = g_D`` and ``a1 grad u1 . n1 + a2 grad u2 . n2 = g_N``
on the interface, with ``n1`` the unit normal pointing out of region 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .meshgen import DomainSpec, circle_domain, flower_domain


def _zero(x, y, *rest):
    return np.zeros_like(np.asarray(x, float))


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    domain: DomainSpec
    a1: float
    a2: float
    u1: Callable
    u2: Callable
    grad1: Callable
    grad2: Callable
    f1: Callable
    f2: Callable
    gD: Callable = _zero
    gN: Callable = _zero  # gN(x, y, n1x, n1y)
    params: tuple = ()

    def __post_init__(self):
        if not (self.a1 > 0 and self.a2 > 0):
            raise ValueError("coefficients must be positive")

    def coefficient(self, region):
        return np.where(np.asarray(region) == 1, self.a1, self.a2)

    def u(self, x, y, region):
        return np.where(np.asarray(region) == 1, self.u1(x, y), self.u2(x, y))

    def grad(self, x, y, region):
        g1, g2 = self.grad1(x, y), self.grad2(x, y)
        r1 = np.asarray(region) == 1
        return np.where(r1, g1[0], g2[0]), np.where(r1, g1[1], g2[1])

    def f(self, x, y, region=None):
        if region is None:
            raise ValueError("region required")
        return np.where(np.asarray(region) == 1, self.f1(x, y), self.f2(x, y))

    def g(self, x, y):
        return self.u2(x, y)


def example1(mu: float, n0: int = 8) -> ProblemSpec:
    """Circle interface, ``u = (1 + mu - r^6)/mu`` inside and ``2 - r^6`` outside."""
    r2 = lambda x, y: x * x + y * y
    f = lambda x, y: 36.0 * r2(x, y) ** 2
    return ProblemSpec(
        "example1", circle_domain(n0), mu, 1.0,
        u1=lambda x, y: (1.0 + mu - r2(x, y) ** 3) / mu,
        u2=lambda x, y: 2.0 - r2(x, y) ** 3,
        grad1=lambda x, y: (-6.0 * r2(x, y) ** 2 * x / mu, -6.0 * r2(x, y) ** 2 * y / mu),
        grad2=lambda x, y: (-6.0 * r2(x, y) ** 2 * x, -6.0 * r2(x, y) ** 2 * y),
        f1=f, f2=f, params=(("mu", mu),),
    )


def _flower_w(x, y):
    r = np.hypot(x, y)
    return r ** 5 - 3.0 * r ** 4 + (x ** 4 - 6.0 * x * x * y * y + y ** 4)


def _flower_grad(x, y):
    r = np.hypot(x, y)
    c = 5.0 * r ** 3 - 12.0 * r ** 2
    return c * x + 4.0 * x ** 3 - 12.0 * x * y * y, c * y + 4.0 * y ** 3 - 12.0 * x * x * y


def example2(mu: float, n0: int = 40, layers0: int = 3) -> ProblemSpec:
    """Flower interface ``r = 3 - cos 4theta``; ``u = w/mu`` inside and ``w`` outside."""
    f = lambda x, y: 48.0 * (x * x + y * y) - 25.0 * np.hypot(x, y) ** 3
    return ProblemSpec(
        "example2", flower_domain(n0, layers0), mu, 1.0,
        u1=lambda x, y: _flower_w(x, y) / mu,
        u2=_flower_w,
        grad1=lambda x, y: tuple(g / mu for g in _flower_grad(x, y)),
        grad2=_flower_grad,
        f1=f, f2=f, params=(("mu", mu),),
    )


def manufactured_jump(mu: float = 10.0, n0: int = 8) -> ProblemSpec:
    """Nonzero value and flux jumps: ``sin x cos y + 5`` inside, ``e^x y`` outside."""
    u1 = lambda x, y: np.sin(x) * np.cos(y) + 5.0
    u2 = lambda x, y: np.exp(x) * y
    g1 = lambda x, y: (np.cos(x) * np.cos(y), -np.sin(x) * np.sin(y))
    g2 = lambda x, y: (np.exp(x) * y, np.exp(x))

    def gN(x, y, nx, ny):
        (ax, ay), (bx, by) = g1(x, y), g2(x, y)
        return (mu * ax - bx) * nx + (mu * ay - by) * ny

    return ProblemSpec(
        "manufactured_jump", circle_domain(n0), mu, 1.0,
        u1=u1, u2=u2, grad1=g1, grad2=g2,
        f1=lambda x, y: 2.0 * mu * np.sin(x) * np.cos(y),
        f2=lambda x, y: -np.exp(x) * y,
        gD=lambda x, y: u1(x, y) - u2(x, y), gN=gN, params=(("mu", mu),),
    )


PROBLEMS = {"example1": example1, "example2": example2, "manufactured_jump": manufactured_jump}


def make_problem(name: str, mu: float) -> ProblemSpec:
    try:
        return PROBLEMS[name](mu)
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
