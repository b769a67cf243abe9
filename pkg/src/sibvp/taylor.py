"""Straight and inverse step functions evaluated by truncated Taylor series.

Straight step:  U'' = (A s + B) U + E s + F,  U(0) = D,  U'(0) = C.
Inverse step:   V'' = (Abar s + Bbar) V'^3,   V(0) = Dbar, V'(0) = Cbar.

Both are evaluated at ``s = s_max``.  The series kernels are written once and
accept floats, arrays or :class:`~sibvp.dual.Dual` arrays, so the same code
produces values, vectorised values over many knots, and exact derivatives.
Convergence decisions look at value parts only, which keeps dual evaluations
bit-identical to plain ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .dual import Dual, seed, tangent_of, value_of

__all__ = [
    "SERIES_TOL",
    "MAX_TERMS",
    "STIFF_TERMS",
    "InvalidInputError",
    "SingularStepError",
    "StraightStepParams",
    "InverseStepParams",
    "StepResult",
    "SensitivityRecord",
    "eval_straight_step",
    "eval_inverse_step",
    "eval_step_with_sensitivities",
    "straight_series",
    "inverse_series",
    "inverse_radicand_min",
    "straight_scalar",
    "inverse_scalar",
    "radicand_min_scalar",
    "is_stiff",
]

SERIES_TOL = 1e-15
MAX_TERMS = 64
# a step needing more terms than this is treated as too expensive
STIFF_TERMS = 48
_STREAK = 3


class InvalidInputError(ValueError):
    pass


class SingularStepError(ArithmeticError):
    """The frozen-coefficient inverse equation blows up inside the step."""


@dataclass(frozen=True)
class StraightStepParams:
    A: float
    B: float
    C: float
    D: float
    E: float = 0.0
    F: float = 0.0
    s_max: float = 1.0

    @property
    def coefficients(self):
        return (self.A, self.B, self.C, self.D, self.E, self.F)


@dataclass(frozen=True)
class InverseStepParams:
    Abar: float
    Bbar: float
    Cbar: float
    Dbar: float
    s_max: float = 1.0

    @property
    def coefficients(self):
        return (self.Abar, self.Bbar, self.Cbar, self.Dbar)


@dataclass(frozen=True)
class StepResult:
    value: float
    derivative: float
    terms_used: int
    converged: bool

    @property
    def stiff(self):
        return is_stiff(self.converged, self.terms_used)


@dataclass(frozen=True)
class SensitivityRecord:
    """Partials of ``U(s_max)`` and ``U'(s_max)`` with respect to the step
    coefficients, in the order of ``names``."""

    names: tuple
    value_partials: np.ndarray
    derivative_partials: np.ndarray


def is_stiff(converged, terms_used):
    return np.logical_or(np.logical_not(converged), np.asarray(terms_used) > STIFF_TERMS)


# ---------------------------------------------------------------------------
# kernels


def _check_controls(tol, max_terms):
    if not (tol > 0):
        raise InvalidInputError(f"tol must be positive, got {tol}")
    if int(max_terms) < 4:
        raise InvalidInputError(f"max_terms must be at least 4, got {max_terms}")


def _zero_like(*xs):
    """0.0 broadcast to the common shape of ``xs`` (dual if any input is)."""
    shape = np.broadcast_shapes(*(np.shape(value_of(x)) for x in xs))
    duals = [x for x in xs if isinstance(x, Dual)]
    if duals:
        return Dual.constant(np.zeros(shape), duals[0].nseeds)
    return np.zeros(shape)


class _Accumulator:
    """Masked running sums with the three-consecutive-small-terms stop rule."""

    def __init__(self, sums, tol, start_terms):
        self.sums = list(sums)
        self.tol = tol
        shape = np.shape(value_of(self.sums[0]))
        self.active = np.ones(shape, dtype=bool)
        self.streak = np.zeros(shape, dtype=int)
        self.terms = np.full(shape, start_terms, dtype=int)
        self.converged = np.zeros(shape, dtype=bool)

    def add(self, terms):
        small = np.ones(self.active.shape, dtype=bool)
        finite = np.ones(self.active.shape, dtype=bool)
        for j, t in enumerate(terms):
            t = np.where(self.active, t, 0.0)
            self.sums[j] = self.sums[j] + t
            tv = np.abs(value_of(t))
            sv = value_of(self.sums[j])
            small &= tv <= self.tol * np.maximum(1.0, np.abs(sv))
            finite &= np.isfinite(sv)
        self.terms = self.terms + self.active
        self.streak = np.where(small, self.streak + 1, 0)
        done = self.active & (self.streak >= _STREAK)
        self.converged |= done & finite
        self.active &= ~done & finite
        return bool(self.active.any())


def straight_series(A, B, C, D, E, F, H, tol=SERIES_TOL, max_terms=MAX_TERMS):
    """``(U(H), U'(H), terms_used, converged)`` for the straight step.

    Works on scaled coefficients ``d_k = c_k H^k`` so that the stop rule
    compares terms of the actual sums.
    """
    _check_controls(tol, max_terms)
    z = _zero_like(A, B, C, D, E, F, H)
    H2 = H * H
    d = [D + z, C * H + z]
    # terms 0 and 1 of (value, derivative) are (D, CH) and (0, C)
    acc = _Accumulator([d[0] + d[1], C + z], tol, 2)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(2, int(max_terms)):
            rhs = B * d[k - 2]
            if k >= 3:
                rhs = rhs + A * H * d[k - 3]
            if k == 2:
                rhs = rhs + F
            elif k == 3:
                rhs = rhs + E * H
            dk = H2 * rhs / float(k * (k - 1))
            d.append(dk)
            if not acc.add([dk, k * dk / H]):
                break
    return acc.sums[0], acc.sums[1], acc.terms, acc.converged


def inverse_radicand_min(Abar, Bbar, Cbar, H):
    """Minimum over ``[0, H]`` of ``1 - 2 Cbar^2 (Abar s^2/2 + Bbar s)``,
    whose inverse square root is the exact ``V'/Cbar``."""
    Abar, Bbar, Cbar, H = (np.asarray(value_of(v), dtype=float) for v in (Abar, Bbar, Cbar, H))
    c2 = Cbar * Cbar

    def rad(s):
        return 1.0 - 2.0 * c2 * (0.5 * Abar * s * s + Bbar * s)

    m = np.minimum(1.0, rad(H))
    with np.errstate(divide="ignore", invalid="ignore"):
        sv = -Bbar / Abar
    inside = (Abar != 0) & (sv > 0) & (sv < H)
    m = np.where(inside, np.minimum(m, rad(np.where(inside, sv, 0.0))), m)
    return m


def inverse_series(Abar, Bbar, Cbar, Dbar, H, tol=SERIES_TOL, max_terms=MAX_TERMS):
    """``(V(H), V'(H), terms_used, converged)`` for the inverse step.

    ``p = V'`` solves ``p' = (Abar s + Bbar) p^3``; its coefficients come from
    Cauchy products for ``p^3`` and ``V`` from term-wise integration.  No
    singularity check is made here (see :func:`inverse_radicand_min`).
    """
    _check_controls(tol, max_terms)
    z = _zero_like(Abar, Bbar, Cbar, Dbar, H)
    q = [Cbar + z]  # scaled coefficients p_k H^k
    sq = []  # scaled coefficients of p^2
    cube = []  # scaled coefficients of p^3
    acc = _Accumulator([Dbar + H * q[0], q[0]], tol, 1)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(0, int(max_terms) - 1):
            # extend p^2 and p^3 to index k
            s = q[0] * q[k]
            for i in range(1, k + 1):
                s = s + q[i] * q[k - i]
            sq.append(s)
            r = sq[0] * q[k]
            for i in range(1, k + 1):
                r = r + sq[i] * q[k - i]
            cube.append(r)
            rhs = Bbar * cube[k]
            if k >= 1:
                rhs = rhs + Abar * H * cube[k - 1]
            qn = H * rhs / float(k + 1)
            q.append(qn)
            if not acc.add([H * qn / float(k + 2), qn]):
                break
    return acc.sums[0], acc.sums[1], acc.terms, acc.converged


# Plain-float twins of the kernels above.  They perform the same floating
# point operations in the same order (so results agree bit for bit) but skip
# numpy dispatch, which dominates the cost of a single step.


def straight_scalar(A, B, C, D, E, F, H, tol=SERIES_TOL, max_terms=MAX_TERMS):
    H2 = H * H
    d = [D, C * H]
    sv, sd = D + C * H, C
    terms, streak = 2, 0
    isfinite = math.isfinite
    for k in range(2, max_terms):
        rhs = B * d[k - 2]
        if k >= 3:
            rhs = rhs + A * H * d[k - 3]
        if k == 2:
            rhs = rhs + F
        elif k == 3:
            rhs = rhs + E * H
        dk = H2 * rhs / float(k * (k - 1))
        d.append(dk)
        td = k * dk / H
        sv = sv + dk
        sd = sd + td
        terms += 1
        if not (isfinite(sv) and isfinite(sd)):
            return sv, sd, terms, False
        if abs(dk) <= tol * max(1.0, abs(sv)) and abs(td) <= tol * max(1.0, abs(sd)):
            streak += 1
            if streak >= _STREAK:
                return sv, sd, terms, True
        else:
            streak = 0
    return sv, sd, terms, False


def inverse_scalar(Abar, Bbar, Cbar, Dbar, H, tol=SERIES_TOL, max_terms=MAX_TERMS):
    q = [Cbar]
    sq = []
    cube = []
    sv, sd = Dbar + H * Cbar, Cbar
    terms, streak = 1, 0
    isfinite = math.isfinite
    for k in range(0, max_terms - 1):
        s = q[0] * q[k]
        for i in range(1, k + 1):
            s = s + q[i] * q[k - i]
        sq.append(s)
        r = sq[0] * q[k]
        for i in range(1, k + 1):
            r = r + sq[i] * q[k - i]
        cube.append(r)
        rhs = Bbar * r
        if k >= 1:
            rhs = rhs + Abar * H * cube[k - 1]
        qn = H * rhs / float(k + 1)
        q.append(qn)
        tv = H * qn / float(k + 2)
        sv = sv + tv
        sd = sd + qn
        terms += 1
        if not (isfinite(sv) and isfinite(sd)):
            return sv, sd, terms, False
        if abs(tv) <= tol * max(1.0, abs(sv)) and abs(qn) <= tol * max(1.0, abs(sd)):
            streak += 1
            if streak >= _STREAK:
                return sv, sd, terms, True
        else:
            streak = 0
    return sv, sd, terms, False


def radicand_min_scalar(Abar, Bbar, Cbar, H):
    c2 = Cbar * Cbar
    m = min(1.0, 1.0 - 2.0 * c2 * (0.5 * Abar * H * H + Bbar * H))
    if Abar != 0:
        sv = -Bbar / Abar
        if 0 < sv < H:
            m = min(m, 1.0 - 2.0 * c2 * (0.5 * Abar * sv * sv + Bbar * sv))
    return m


# ---------------------------------------------------------------------------
# scalar API


def _validate(p):
    for f in fields(p):
        v = getattr(p, f.name)
        if not math.isfinite(v):
            raise InvalidInputError(f"{f.name} must be finite, got {v}")
    if not p.s_max > 0:
        raise InvalidInputError(f"s_max must be positive, got {p.s_max}")


def _check_singular(p: InverseStepParams):
    if radicand_min_scalar(p.Abar, p.Bbar, p.Cbar, p.s_max) <= 0:
        raise SingularStepError(
            f"inverse step singular within s_max={p.s_max} "
            f"(Abar={p.Abar}, Bbar={p.Bbar}, Cbar={p.Cbar})"
        )


def _result(v, dv, n, ok):
    return StepResult(float(value_of(v)), float(value_of(dv)), int(n), bool(ok))


def eval_straight_step(p: StraightStepParams, tol=SERIES_TOL, max_terms=MAX_TERMS) -> StepResult:
    """Propagate (D, C) over ``s_max`` through the straight step function.

    A diverging sum is reported with ``converged=False`` rather than raised.
    """
    _validate(p)
    _check_controls(tol, max_terms)
    return _result(*straight_scalar(*map(float, p.coefficients), float(p.s_max), tol, int(max_terms)))


def eval_inverse_step(p: InverseStepParams, tol=SERIES_TOL, max_terms=MAX_TERMS) -> StepResult:
    _validate(p)
    _check_singular(p)
    _check_controls(tol, max_terms)
    return _result(*inverse_scalar(*map(float, p.coefficients), float(p.s_max), tol, int(max_terms)))


def eval_step_with_sensitivities(kind, params, tol=SERIES_TOL, max_terms=MAX_TERMS):
    """Step result plus partials with respect to every coefficient.

    ``kind`` is ``"straight"`` or ``"inverse"``.  All coefficients are seeded
    in a single multi-direction dual pass.
    """
    _validate(params)
    names = tuple(f.name for f in fields(params) if f.name != "s_max")
    coeffs = params.coefficients
    duals = seed(coeffs, len(coeffs))
    if kind == "straight":
        v, dv, n, ok = straight_series(*duals, params.s_max, tol, max_terms)
    elif kind == "inverse":
        _check_singular(params)
        v, dv, n, ok = inverse_series(*duals, params.s_max, tol, max_terms)
    else:
        raise InvalidInputError(f"kind must be 'straight' or 'inverse', got {kind!r}")
    res = _result(v, dv, n, ok)
    k = len(coeffs)
    sens = SensitivityRecord(names, np.array(tangent_of(v, k), dtype=float).reshape(k),
                             np.array(tangent_of(dv, k), dtype=float).reshape(k))
    return res, sens
