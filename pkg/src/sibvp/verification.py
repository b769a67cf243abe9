"""Reference solutions, kappa error profiles and the convergence harness.

The references are independent of the step-function machinery:

* ``rk_oracle``: adaptive Runge-Kutta (DOP853) on the original ODE,
* ``exact_bvpt21``: the closed-form bvpT21 solution,
* ``troesch_inverse_reference``: quadrature of the Troesch first integral
  for the inverse branch from a given joint,
* :class:`TroeschReference`: the exact Troesch solution, with the unknown
  slope ``u'(0)`` fixed by quadrature of the first integral,
* :class:`MeshReference`: a finer SI solution used as a self-reference.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from .hybrid import HybridMesh, NewtonConfig, solve
from .problems import ProblemInstance
from .shooting import ShootConfig

__all__ = [
    "StiffnessAbortError",
    "InvalidJointError",
    "RKSolution",
    "rk_oracle",
    "exact_bvpt21",
    "troesch_inverse_reference",
    "TroeschReference",
    "Bvpt21Reference",
    "MeshReference",
    "ErrorProfile",
    "KappaReport",
    "kappa_profiles",
    "ConvergenceReport",
    "convergence_order",
    "fit_order",
    "troesch_bound_violations",
]

log = logging.getLogger(__name__)


class StiffnessAbortError(RuntimeError):
    """The Runge-Kutta oracle could not complete (step size underflow)."""


class InvalidJointError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Runge-Kutta oracle


@dataclass(frozen=True)
class RKSolution:
    x0: float
    x1: float
    dense: Callable
    nfev: int

    def __call__(self, x):
        """``(u, u')`` at ``x`` (within the integration span)."""
        y = self.dense(np.asarray(x, dtype=float))
        return y[0], y[1]


def rk_oracle(rhs, y0, span, tol=1e-12, atol=None) -> RKSolution:
    """Integrate ``u'' = rhs(u, u', x)`` from ``y0 = (u, u')`` over ``span``
    with an embedded 8(5,3) Runge-Kutta pair and dense output."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    x0, x1 = map(float, span)

    def f(x, y):
        return [y[1], rhs(y[0], y[1], x)]

    sol = solve_ivp(f, (x0, x1), list(map(float, y0)), method="DOP853", rtol=tol,
                    atol=tol * 1e-3 if atol is None else atol, dense_output=True)
    if sol.status != 0:
        raise StiffnessAbortError(f"integration stopped at x={sol.t[-1]:.6g}: {sol.message}")
    return RKSolution(x0, x1, sol.sol, sol.nfev)


# ---------------------------------------------------------------------------
# closed forms and quadrature references


def exact_bvpt21(x, xi):
    """``(u, u')`` of the bvpT21 solution ``exp(-x / sqrt(xi))``."""
    r = math.sqrt(xi)
    u = np.exp(-np.asarray(x, dtype=float) / r)
    return u, -u / r


def _cumulative_quad(f, lo, pts, tol):
    """``int_lo^p f`` for every ``p`` in ``pts`` (any order), integrating
    piecewise between sorted points."""
    pts = np.asarray(pts, dtype=float)
    order = np.argsort(pts, kind="stable")
    out = np.empty_like(pts)
    acc, prev = 0.0, lo
    for j in order:
        p = pts[j]
        if p != prev:
            acc += quad(f, prev, p, epsabs=tol, epsrel=min(1e-13, tol), limit=200)[0]
            prev = p
        out[j] = acc
    return out


def troesch_inverse_reference(u, joint, lam, quad_tol=1e-13):
    """Inverse branch ``(x(u), x'(u))`` for Troesch's problem from the joint
    ``(c, u_c, u'_c)`` via the first integral
    ``x'(u)^-2 = u'_c^2 + 2 (cosh(lam u) - cosh(lam u_c))``."""
    c, uc, duc = map(float, joint)
    u = np.asarray(u, dtype=float)
    scalar = u.ndim == 0
    u = np.atleast_1d(u)
    if np.any(u < uc):
        raise InvalidJointError("reference defined for u >= u_c only")

    def rad(v):
        return duc * duc + 2.0 * (np.cosh(lam * v) - math.cosh(lam * uc))

    if np.any(rad(u) <= 0) or duc == 0:
        raise InvalidJointError("non-positive radicand; the joint is not on a monotone branch")
    dx = 1.0 / np.sqrt(rad(u))
    x = c + _cumulative_quad(lambda v: 1.0 / math.sqrt(rad(v)), uc, u, quad_tol)
    if scalar:
        return float(x[0]), float(dx[0])
    return x, dx


class TroeschReference:
    """Exact solution of Troesch's problem ``u'' = lam sinh(lam u)``,
    ``u(0) = 0``, ``u(1) = 1``.

    The slope ``p = u'(0)`` solves ``x(1) = 1`` with
    ``x(u) = (1/lam) int_0^{S(u)} ds / sqrt(1 + (p/2)^2 sinh(s)^2)`` and
    ``S(u) = asinh(2 sinh(lam u / 2) / p)``, a smooth form of the first
    integral ``u'^2 = p^2 + 4 sinh(lam u / 2)^2``.
    """

    def __init__(self, lam, tol=1e-13):
        self.lam = float(lam)
        self.tol = tol
        lp = brentq(lambda lp: self._x(1.0, math.exp(lp)) - 1.0, math.log(1e-200), math.log(1e3),
                    xtol=1e-15, rtol=1e-15)
        self.p = math.exp(lp)
        self._ode = None

    def _x(self, u, p):
        lam = self.lam
        S = math.asinh(2.0 * math.sinh(0.5 * lam * u) / p)
        f = lambda s: 1.0 / math.hypot(1.0, 0.5 * p * math.sinh(s))
        return quad(f, 0.0, S, epsabs=self.tol, epsrel=self.tol, limit=200)[0] / lam

    def slope(self, u):
        u = np.asarray(u, dtype=float)
        return np.sqrt(self.p ** 2 + 4.0 * np.sinh(0.5 * self.lam * u) ** 2)

    def x_of_u(self, u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        S = np.arcsinh(2.0 * np.sinh(0.5 * self.lam * u) / self.p)
        f = lambda s: 1.0 / math.hypot(1.0, 0.5 * self.p * math.sinh(s))
        return _cumulative_quad(f, 0.0, S, self.tol) / self.lam

    def straight(self, x):
        """``(u, u')`` at ``x``, from the first-order form ``u' = slope(u)``."""
        if self._ode is None:
            sol = solve_ivp(lambda x, y: [self.slope(y[0])], (0.0, 1.0), [0.0], method="DOP853",
                            rtol=1e-13, atol=1e-16 * self.p, dense_output=True)
            if sol.status != 0:
                raise StiffnessAbortError(sol.message)
            self._ode = sol.sol
        u = self._ode(np.asarray(x, dtype=float))[0]
        return u, self.slope(u)

    def inverse(self, u):
        """``(x, x')`` at ``u``."""
        u = np.asarray(u, dtype=float)
        x = self.x_of_u(u).reshape(u.shape)
        return x, 1.0 / self.slope(u)

    def joint(self, c):
        """Exact ``(c, u(c), u'(c))``."""
        u, du = self.straight(c)
        u = float(u)
        # polish with the quadrature form
        u = brentq(lambda v: self._x(v, self.p) - c, u * (1 - 1e-6) - 1e-300, min(1.0, u * (1 + 1e-6)) + 1e-300)
        return float(c), u, float(self.slope(u))


class Bvpt21Reference:
    def __init__(self, xi):
        self.xi = float(xi)

    def straight(self, x):
        return exact_bvpt21(x, self.xi)

    def inverse(self, u):
        r = math.sqrt(self.xi)
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return -r * np.log(u), -r / u


class MeshReference:
    """A converged SI mesh used as a reference; NaN outside its branches."""

    def __init__(self, mesh: HybridMesh):
        self.mesh = mesh

    def straight(self, x):
        u, du = self.mesh.straight_at(x)
        if self.mesh.interior:
            ut, dut = self.mesh.straight_at(x, branch="tail")
            use = np.isnan(u)
            u, du = np.where(use, ut, u), np.where(use, dut, du)
        return u, du

    def inverse(self, u):
        return self.mesh.inverse_at(u)


# ---------------------------------------------------------------------------
# kappa profiles


@dataclass(frozen=True)
class ErrorProfile:
    """Rows ``(abscissa, kappa0, kappa1)`` with
    ``kappa_k = h^-2 |reference^(k) - solution^(k)|``."""

    samples: np.ndarray
    kappa0_sup: float
    kappa1_sup: float
    h: float

    @classmethod
    def from_errors(cls, s, e0, e1, h):
        s, e0, e1 = (np.asarray(v, dtype=float).ravel() for v in (s, e0, e1))
        ok = ~(np.isnan(e0) | np.isnan(e1))
        samples = np.column_stack([s[ok], np.abs(e0[ok]) / h ** 2, np.abs(e1[ok]) / h ** 2])
        k0 = float(samples[:, 1].max()) if len(samples) else math.nan
        k1 = float(samples[:, 2].max()) if len(samples) else math.nan
        return cls(samples, k0, k1, h)

    def argmax0(self):
        return float(self.samples[np.argmax(self.samples[:, 1]), 0])


@dataclass(frozen=True)
class KappaReport:
    straight: ErrorProfile
    inverse: ErrorProfile


def _fill(knots, per_interval):
    if per_interval <= 0:
        return np.asarray(knots, dtype=float)
    frac = np.arange(1, per_interval + 1) / (per_interval + 1)
    inner = (knots[:-1, None] + np.diff(knots)[:, None] * frac[None, :]).ravel()
    return np.sort(np.concatenate([knots, inner]))


def kappa_profiles(mesh: HybridMesh, reference, per_interval: int = 1, h: Optional[float] = None) -> KappaReport:
    """kappa profiles of ``mesh`` against ``reference`` (an object with
    ``straight(x) -> (u, u')`` and ``inverse(u) -> (x, x')``).

    Samples are the knots plus ``per_interval`` interior points per
    interval; points where the reference is undefined (NaN) are skipped.
    """
    h = mesh.h if h is None else h
    o = mesh.orientation
    xs = o.x(_fill(mesh.ts, per_interval))
    u, du = mesh.straight_at(xs)
    parts = [(xs, u, du)]
    if mesh.interior:
        xt = o.x(_fill(mesh.tt, per_interval))
        ut, dut = mesh.straight_at(xt, branch="tail")
        parts.append((xt, ut, dut))
    xs = np.concatenate([p[0] for p in parts])
    u = np.concatenate([p[1] for p in parts])
    du = np.concatenate([p[2] for p in parts])
    try:
        ru, rdu = reference.straight(xs)
    except Exception as e:
        raise RuntimeError(f"straight reference failed on [{xs.min():.6g}, {xs.max():.6g}]: {e}") from e
    straight = ErrorProfile.from_errors(xs, ru - u, rdu - du, h)

    us = o.u(_fill(mesh.ubar, per_interval))
    x, dx = mesh.inverse_at(us)
    try:
        rx, rdx = reference.inverse(us)
    except Exception as e:
        raise RuntimeError(f"inverse reference failed on [{us.min():.6g}, {us.max():.6g}]: {e}") from e
    inverse = ErrorProfile.from_errors(us, rx - x, rdx - dx, h)
    return KappaReport(straight, inverse)


# ---------------------------------------------------------------------------
# convergence harness


def fit_order(hs, errs):
    """Least-squares slope of ``log err`` against ``log h``."""
    hs, errs = np.asarray(hs, dtype=float), np.asarray(errs, dtype=float)
    ok = (errs > 0) & np.isfinite(errs)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(hs[ok]), np.log(errs[ok]), 1)[0])


@dataclass
class ConvergenceReport:
    """Rows ``(h, sup_error_straight, sup_error_inverse)`` by decreasing h;
    ``fitted_order`` is the slope for the larger of the two branch errors."""

    rows: list
    fitted_order: float
    order_straight: float = math.nan
    order_inverse: float = math.nan
    complete: bool = True
    failures: list = field(default_factory=list)


def convergence_order(instance: ProblemInstance, h_list: Sequence[float], reference,
                      shoot_cfg: Optional[ShootConfig] = None, newton_cfg: Optional[NewtonConfig] = None,
                      jobs: int = 1) -> ConvergenceReport:
    """Solve at each ``h`` and fit the observed order of the sup errors
    (value errors, straight and inverse branch) against ``reference``."""
    hs = sorted(map(float, h_list), reverse=True)
    if len(hs) < 3:
        raise ValueError("need at least three step sizes")
    base = shoot_cfg or ShootConfig()

    def run(h):
        cfg = ShootConfig(h, base.u_crit, base.tol_boundary, base.max_outer_iters, base.series_tol,
                          base.max_terms, base.multilevel)
        mesh, _ = solve(instance, cfg, newton_cfg)
        rep = kappa_profiles(mesh, reference, h=h)
        return rep.straight.kappa0_sup * h * h, rep.inverse.kappa0_sup * h * h

    rows, failures = [], []
    with ThreadPoolExecutor(max_workers=max(1, int(jobs))) as ex:
        futures = [(h, ex.submit(run, h)) for h in hs]
        for h, fut in futures:
            try:
                es, ei = fut.result()
                rows.append((h, es, ei))
            except Exception as e:  # a failed rung leaves a partial report
                log.warning("solve at h=%g failed: %s", h, e)
                failures.append((h, str(e)))
    if len(rows) < 2:
        return ConvergenceReport(rows, math.nan, complete=False, failures=failures)
    h_arr = [r[0] for r in rows]
    es = [r[1] for r in rows]
    ei = [r[2] for r in rows]
    return ConvergenceReport(rows, fit_order(h_arr, np.maximum(es, ei)), fit_order(h_arr, es),
                             fit_order(h_arr, ei), not failures, failures)


# ---------------------------------------------------------------------------
# shape checks


def troesch_bound_violations(mesh: HybridMesh, u_b: float = 1.0, tol: float = 1e-12):
    """Sign and shape bounds expected of Troesch solutions: on the straight
    branch ``0 < u < u_b`` away from ``a``, ``u' > 0`` and ``u'`` non-decreasing;
    on the inverse branch ``c < x < b`` away from the joint, ``x' > 0`` and
    ``x'`` non-increasing (concavity).  Returns a list of messages."""
    out = []
    S, I = mesh.straight, mesh.inverse
    c = mesh.critical
    if not np.all((S[1:, 1] > 0) & (S[1:, 1] < u_b)):
        out.append("straight values leave (0, u_b)")
    if not np.all(S[:, 2] > 0):
        out.append("straight slope not positive")
    if np.any(np.diff(S[:, 2]) < -tol):
        out.append("straight branch not convex")
    if not np.all((I[1:, 1] > c - tol) & (I[1:, 1] < 1.0 + tol)):
        out.append("inverse abscissae leave (c, b)")
    if not np.all(I[:, 2] > 0):
        out.append("inverse slope not positive")
    if np.any(np.diff(I[:, 2]) > tol):
        out.append("inverse branch not concave")
    return out
