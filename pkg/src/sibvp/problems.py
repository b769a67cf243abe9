"""Problem family ``u'' = rhs(u, u', x)`` with Dirichlet data, and the
built-in benchmarks (Troesch, bvpT21, bvpT30).

Callbacks must be written with numpy ufuncs so that they accept both float
arrays and :class:`sibvp.dual.Dual` arrays; the Newton Jacobian is obtained
by differentiating through them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, Optional

import numpy as np

__all__ = [
    "InvalidParameterError",
    "BvpProblem",
    "ProblemInstance",
    "Orientation",
    "make_troesch",
    "make_bvpt21",
    "make_bvpt30",
    "PROBLEMS",
    "make_problem",
]

LAYER_HINTS = ("right", "left", "interior", "unknown")


class InvalidParameterError(ValueError):
    pass


@dataclass(frozen=True)
class BvpProblem:
    """Two-point problem ``u'' = rhs(u, u', x)``, ``u(a) = u_a``, ``u(b) = u_b``.

    ``rhs_partials`` returns ``(d/du, d/du', d/dx)`` of ``rhs``.  When
    ``factor_form`` is given the right-hand side is ``N(u, x) u + g(x)`` with
    ``factor_form(u, x) -> (N, N_u, N_x)`` and ``inhomogeneity(x) -> (g, g')``
    (``g = 0`` when absent).
    """

    a: float
    b: float
    u_a: float
    u_b: float
    rhs: Callable
    rhs_partials: Callable
    factor_form: Optional[Callable] = None
    inhomogeneity: Optional[Callable] = None
    layer_hint: str = "unknown"
    name: str = "custom"

    def __post_init__(self):
        if not self.a < self.b:
            raise InvalidParameterError(f"need a < b, got a={self.a}, b={self.b}")
        if self.layer_hint not in LAYER_HINTS:
            raise InvalidParameterError(f"layer_hint must be one of {LAYER_HINTS}")

    # Local linearisations used by the step functions.  Both are first-order
    # accurate expansions of rhs along the solution about a knot.

    def straight_coefficients(self, u, du, x):
        """Coefficients ``(A, B, E, F)`` of ``U'' = (A s + B) U + E s + F``
        frozen at the knot state ``(u, u')`` at ``x``."""
        if self.factor_form is not None:
            n, n_u, n_x = self.factor_form(u, x)
            A = n_u * du + n_x
            B = n
            if self.inhomogeneity is not None:
                F, E = self.inhomogeneity(x)
            else:
                E = F = 0.0 * B
            return A, B, E, F
        f = self.rhs(u, du, x)
        f_u, f_du, f_x = self.rhs_partials(u, du, x)
        B = f_u + 0.0 * f
        return 0.0 * B, B, f_du * f + f_x, f - f_u * u

    def inverse_coefficients(self, x, dx, u):
        """Coefficients ``(Abar, Bbar)`` of ``V'' = (Abar s + Bbar) V'^3`` for
        the inverse function ``x(u)`` at the knot ``(x, x')`` over ``u``."""
        du = 1.0 / dx
        f = self.rhs(u, du, x)
        f_u, f_du, f_x = self.rhs_partials(u, du, x)
        # d/du of rhs along x(u); the u'-term uses d(1/x')/du = rhs * x'
        abar = -(f_u + f_x * dx + f_du * f * dx)
        return abar + 0.0 * f, -f


@dataclass(frozen=True)
class ProblemInstance:
    problem: BvpProblem
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))

    @property
    def name(self):
        return self.problem.name

    def label(self):
        ps = ",".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.name}({ps})"


# ---------------------------------------------------------------------------
# orientation: reduce every case to "march left to right, u increasing"


@dataclass(frozen=True)
class Orientation:
    a: float
    b: float
    mirror: bool = False
    negate: bool = False

    @property
    def sx(self):
        return -1.0 if self.mirror else 1.0

    @property
    def su(self):
        return -1.0 if self.negate else 1.0

    def x(self, t):
        return self.a + self.b - t if self.mirror else t

    def u(self, w):
        return self.su * w

    def slope(self, dw):
        """Physical ``du/dx`` from canonical ``dw/dt``."""
        return self.su * self.sx * dw

    def inverse_slope(self, dt):
        """Physical ``dx/du`` from canonical ``dt/dw``."""
        return self.su * self.sx * dt

    @classmethod
    def for_problem(cls, problem: BvpProblem):
        mirror = problem.layer_hint == "left"
        start, end = (problem.u_b, problem.u_a) if mirror else (problem.u_a, problem.u_b)
        return cls(problem.a, problem.b, mirror, end < start)

    def apply(self, p: BvpProblem) -> BvpProblem:
        """The problem rewritten in canonical coordinates ``t``, ``w``."""
        if not (self.mirror or self.negate):
            return p
        sx, su, x = self.sx, self.su, self.x

        def rhs(w, dw, t):
            return su * p.rhs(su * w, su * sx * dw, x(t))

        def rhs_partials(w, dw, t):
            f_u, f_du, f_x = p.rhs_partials(su * w, su * sx * dw, x(t))
            return f_u, sx * f_du, su * sx * f_x

        factor = inhom = None
        if p.factor_form is not None:

            def factor(w, t):
                n, n_u, n_x = p.factor_form(su * w, x(t))
                return n, su * n_u, sx * n_x

        if p.inhomogeneity is not None:

            def inhom(t):
                g, dg = p.inhomogeneity(x(t))
                return su * g, su * sx * dg

        ua, ub = (p.u_b, p.u_a) if self.mirror else (p.u_a, p.u_b)
        hint = {"left": "right"}.get(p.layer_hint, p.layer_hint)
        return BvpProblem(
            p.a, p.b, su * ua, su * ub, rhs, rhs_partials, factor, inhom, hint, p.name
        )


# ---------------------------------------------------------------------------
# benchmarks


def _positive(name, value):
    value = float(value)
    if not (math.isfinite(value) and value > 0):
        raise InvalidParameterError(f"{name} must be positive and finite, got {value}")
    return value


def _troesch_factor(lam):
    lam2 = lam * lam

    def factor(u, x):
        z = lam * u
        z2 = z * z
        small = np.abs(z) < 1e-3
        zs = np.where(small, 1.0, z)
        n = lam2 * np.where(small, 1.0 + z2 / 6.0 + z2 * z2 / 120.0 + z2**3 / 5040.0, np.sinh(zs) / zs)
        # d/dz of sinh(z)/z, series below 1e-2 where the closed form cancels
        mid = np.abs(z) < 1e-2
        zm = np.where(mid, 1.0, z)
        dn = np.where(
            mid,
            z / 3.0 + z * z2 / 30.0 + z * z2 * z2 / 840.0 + z * z2**3 / 45360.0,
            (zm * np.cosh(zm) - np.sinh(zm)) / (zm * zm),
        )
        return n, lam2 * lam * dn, 0.0 * n

    return factor


def make_troesch(lam: float) -> ProblemInstance:
    """Troesch's problem ``u'' = lam sinh(lam u)``, ``u(0) = 0``, ``u(1) = 1``."""
    lam = _positive("lambda", lam)

    def rhs(u, du, x):
        return lam * np.sinh(lam * u)

    def rhs_partials(u, du, x):
        d = lam * lam * np.cosh(lam * u)
        return d, 0.0 * d, 0.0 * d

    p = BvpProblem(0.0, 1.0, 0.0, 1.0, rhs, rhs_partials, _troesch_factor(lam), None, "right", "troesch")
    return ProblemInstance(p, {"lambda": lam})


def make_bvpt21(xi: float) -> ProblemInstance:
    """bvpT21: ``xi u'' = (u + 1) u - exp(-2x/sqrt(xi))`` with exact solution
    ``exp(-x/sqrt(xi))``."""
    xi = _positive("xi", xi)
    r = math.sqrt(xi)

    def rhs(u, du, x):
        return ((u + 1.0) * u - np.exp(-2.0 * x / r)) / xi

    def rhs_partials(u, du, x):
        return (2.0 * u + 1.0) / xi, 0.0 * u, 2.0 * np.exp(-2.0 * x / r) / (r * xi) + 0.0 * u

    def factor(u, x):
        n = (u + 1.0) / xi
        return n, 1.0 / xi + 0.0 * n, 0.0 * n

    def inhom(x):
        e = np.exp(-2.0 * x / r)
        return -e / xi, 2.0 * e / (r * xi)

    p = BvpProblem(0.0, 1.0, 1.0, math.exp(-1.0 / r), rhs, rhs_partials, factor, inhom, "left", "bvpt21")
    return ProblemInstance(p, {"xi": xi})


def make_bvpt30(xi: float) -> ProblemInstance:
    """bvpT30: ``xi u'' = (1 - u') u``, ``u(0) = -7/6``, ``u(1) = 3/2``
    (interior layer, derivative-dependent right-hand side)."""
    xi = _positive("xi", xi)

    def rhs(u, du, x):
        return (1.0 - du) * u / xi

    def rhs_partials(u, du, x):
        return (1.0 - du) / xi, -u / xi, 0.0 * u

    p = BvpProblem(0.0, 1.0, -7.0 / 6.0, 1.5, rhs, rhs_partials, None, None, "interior", "bvpt30")
    return ProblemInstance(p, {"xi": xi})


PROBLEMS = {
    "troesch": (make_troesch, "lambda"),
    "bvpt21": (make_bvpt21, "xi"),
    "bvpt30": (make_bvpt30, "xi"),
}


def make_problem(name: str, params: Mapping[str, float]) -> ProblemInstance:
    """Build a registered problem from a ``{param: value}`` map."""
    try:
        factory, pname = PROBLEMS[name]
    except KeyError:
        raise InvalidParameterError(
            f"unknown problem {name!r}; available: {', '.join(sorted(PROBLEMS))}"
        ) from None
    extra = set(params) - {pname}
    if extra:
        raise InvalidParameterError(f"{name} takes only {pname!r}, got {sorted(extra)}")
    if pname not in params:
        raise InvalidParameterError(f"{name} requires parameter {pname!r}")
    return factory(params[pname])
