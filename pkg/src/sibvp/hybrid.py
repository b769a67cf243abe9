"""Hybrid straight/inverse nonlinear system and its Newton solution.

Unknowns are the knot states on each branch, interleaved as
``(value, derivative)`` per knot and ordered straight branch, inverse branch,
then the straight tail (interior layers only).  Residual rows are the
propagation defects of the step functions plus the boundary and matching
conditions; ordered the same way they give a banded Jacobian.

The first inverse abscissa is not fixed: it equals the value of the last
straight knot, so the length of the first inverse interval is itself an
unknown.  For interior layers the last inverse abscissa likewise equals the
first tail value.  Everything is kept in the canonical frame internally.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.linalg import solve_banded

from .dual import seed, tangent_of, value_of
from .problems import BvpProblem, Orientation, ProblemInstance
from .shooting import ShootConfig, Trajectory, canonical, find_initial_guess
from .taylor import MAX_TERMS, SERIES_TOL, inverse_radicand_min, inverse_series, straight_series

__all__ = [
    "NewtonConfig",
    "HybridMesh",
    "SolutionProfile",
    "AssemblyError",
    "LinearSolveError",
    "NewtonDivergedError",
    "SolveError",
    "mesh_from_trajectory",
    "assemble_residual_and_jacobian",
    "newton_solve",
    "refine_mesh",
    "solve",
    "sample_profile",
]

log = logging.getLogger(__name__)


class AssemblyError(ArithmeticError):
    pass


class LinearSolveError(ArithmeticError):
    pass


class NewtonDivergedError(RuntimeError):
    def __init__(self, msg, residual_norm, history=()):
        super().__init__(msg)
        self.residual_norm = residual_norm
        self.history = list(history)


class SolveError(RuntimeError):
    """A pipeline stage failed; ``stage`` is ``"shooting"`` or ``"newton"``."""

    def __init__(self, stage, cause):
        super().__init__(f"{stage} stage failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class NewtonConfig:
    tol_residual: float = 1e-10
    tol_step: float = 1e-12
    max_iters: int = 50
    damping: float = 0.5
    max_halvings: int = 8
    refine_factor: float = 1.25
    series_tol: float = SERIES_TOL
    max_terms: int = MAX_TERMS

    def __post_init__(self):
        if not (self.tol_residual > 0 and self.tol_step > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if not self.refine_factor > 1:
            raise ValueError("refine_factor must exceed 1")


@dataclass
class HybridMesh:
    """Knot states of the hybrid problem in the canonical frame.

    ``ts``/``Ys``: straight abscissae and ``(w, w')`` states.
    ``ubar``/``Yi``: inverse abscissae and ``(t, t')`` states; ``ubar[0]``
    mirrors ``Ys[-1, 0]`` and, for interior layers, ``ubar[-1]`` mirrors
    ``Yt[0, 0]``.  ``tt``/``Yt``: tail branch (``None`` unless interior).
    """

    problem: BvpProblem
    orientation: Orientation
    h: float
    critical_t: tuple
    ts: np.ndarray
    Ys: np.ndarray
    ubar: np.ndarray
    Yi: np.ndarray
    tt: Optional[np.ndarray] = None
    Yt: Optional[np.ndarray] = None
    history: list = field(default_factory=list)

    @property
    def interior(self):
        return self.tt is not None

    @property
    def n_unknowns(self):
        n = 2 * (len(self.ts) + len(self.ubar))
        return n + (2 * len(self.tt) if self.interior else 0)

    # -- packing ------------------------------------------------------------
    def pack(self):
        parts = [self.Ys.ravel(), self.Yi.ravel()]
        if self.interior:
            parts.append(self.Yt.ravel())
        return np.concatenate(parts)

    def unpack(self, z):
        n1, n2 = len(self.ts), len(self.ubar)
        Ys = z[: 2 * n1].reshape(n1, 2).copy()
        Yi = z[2 * n1: 2 * (n1 + n2)].reshape(n2, 2).copy()
        ubar = self.ubar.copy()
        ubar[0] = Ys[-1, 0]
        Yt = None
        if self.interior:
            Yt = z[2 * (n1 + n2):].reshape(-1, 2).copy()
            ubar[-1] = Yt[0, 0]
        return replace(self, Ys=Ys, Yi=Yi, ubar=ubar, Yt=Yt, history=list(self.history))

    # -- physical views -----------------------------------------------------
    @property
    def critical(self):
        vals = tuple(self.orientation.x(t) for t in self.critical_t)
        return vals[0] if len(vals) == 1 else vals

    @property
    def straight(self):
        """Physical ``(x, u, u')`` rows of the straight branch."""
        o = self.orientation
        return np.column_stack([o.x(self.ts), o.u(self.Ys[:, 0]), o.slope(self.Ys[:, 1])])

    @property
    def inverse(self):
        """Physical ``(u, x, x')`` rows of the inverse branch."""
        o = self.orientation
        return np.column_stack([o.u(self.ubar), o.x(self.Yi[:, 0]), o.inverse_slope(self.Yi[:, 1])])

    @property
    def tail(self):
        if not self.interior:
            return np.empty((0, 3))
        o = self.orientation
        return np.column_stack([o.x(self.tt), o.u(self.Yt[:, 0]), o.slope(self.Yt[:, 1])])

    @property
    def n_straight(self):
        """Number of straight-branch intervals (tail included)."""
        return len(self.ts) - 1 + (len(self.tt) - 1 if self.interior else 0)

    @property
    def n_inverse(self):
        return len(self.ubar) - 1

    @property
    def joint(self):
        """Physical ``(c, u(c), u'(c))`` at the first critical point."""
        return tuple(self.straight[-1])

    # -- dense evaluation ---------------------------------------------------
    def _dense(self, knots, states, q, kind):
        q = np.asarray(q, dtype=float)
        out = np.full(q.shape + (2,), np.nan)
        lo, hi = knots[0], knots[-1]
        inside = (q >= lo) & (q <= hi)
        if not inside.any():
            return out
        qi = q[inside]
        idx = np.clip(np.searchsorted(knots, qi, side="right") - 1, 0, len(knots) - 2)
        s = qi - knots[idx]
        exact = s == 0
        s = np.where(exact, 1.0, s)
        a, b = states[idx, 0], states[idx, 1]
        if kind == "straight":
            A, B, E, F = self.problem.straight_coefficients(a, b, knots[idx])
            v, d, _, _ = straight_series(A, B, b, a, E, F, s)
        else:
            Ab, Bb = self.problem.inverse_coefficients(a, b, knots[idx])
            v, d, _, _ = inverse_series(Ab, Bb, b, a, s)
        v = np.where(exact, a, v)
        d = np.where(exact, b, d)
        res = np.empty(qi.shape + (2,))
        res[..., 0], res[..., 1] = v, d
        out[inside] = res
        return out

    def straight_at(self, x, branch="first"):
        """Physical ``(u, u')`` on a straight branch at physical ``x``; NaN
        outside the branch.  ``branch`` is ``"first"`` or ``"tail"``."""
        o = self.orientation
        t = o.x(np.asarray(x, dtype=float))  # the mirror map is an involution
        if branch == "tail":
            if not self.interior:
                raise ValueError("mesh has no tail branch")
            r = self._dense(self.tt, self.Yt, t, "straight")
        else:
            r = self._dense(self.ts, self.Ys, t, "straight")
        return o.u(r[..., 0]), o.slope(r[..., 1])

    def inverse_at(self, u):
        """Physical ``(x, x')`` on the inverse branch at physical ``u``."""
        o = self.orientation
        w = o.u(np.asarray(u, dtype=float))
        r = self._dense(self.ubar, self.Yi, w, "inverse")
        return o.x(r[..., 0]), o.inverse_slope(r[..., 1])


@dataclass(frozen=True)
class SolutionProfile:
    """Densely sampled physical curves: ``straight`` and ``tail`` rows are
    ``(x, u, u')``, ``inverse`` rows ``(u, x, x')``."""

    straight: np.ndarray
    inverse: np.ndarray
    tail: np.ndarray


# ---------------------------------------------------------------------------
# construction


def mesh_from_trajectory(tr: Trajectory, instance: ProblemInstance) -> HybridMesh:
    o, P = canonical(instance)
    if len(tr.inverse) < 2:
        raise ValueError("trajectory has no inverse branch; the hybrid system needs one")
    S, I = tr.straight, tr.inverse
    tt = Yt = None
    if tr.tail is not None:
        tt, Yt = tr.tail[:, 0].copy(), tr.tail[:, 1:].copy()
    return HybridMesh(P, o, tr.h, tuple(tr.critical_t), S[:, 0].copy(), S[:, 1:].copy(),
                      I[:, 0].copy(), I[:, 1:].copy(), tt, Yt)


def reseed(mesh: HybridMesh, instance: ProblemInstance) -> HybridMesh:
    """Reuse a mesh (abscissae, states, critical points) as the initial guess
    for a related instance."""
    o, P = canonical(instance)
    if o != mesh.orientation:
        raise ValueError("seed mesh orientation does not match the instance")
    return replace(mesh, problem=P, history=[])


# ---------------------------------------------------------------------------
# residual and Jacobian


def _straight_block(P, t, Y, tol, nmax, jac):
    w, dw = Y[:-1, 0], Y[:-1, 1]
    H = np.diff(t)
    if jac:
        w, dw = seed([w, dw], 2)
    A, B, E, F = P.straight_coefficients(w, dw, t[:-1])
    v, d, _, _ = straight_series(A, B, dw, w, E, F, H, tol, nmax)
    r = np.column_stack([Y[1:, 0] - value_of(v), Y[1:, 1] - value_of(d)])
    if not jac:
        return r, None
    return r, (-tangent_of(v, 2), -tangent_of(d, 2))


class _Singular(Exception):
    def __init__(self, k):
        self.k = k


def _inverse_block(P, ubar, Y, tol, nmax, jac):
    t, dt = Y[:-1, 0], Y[:-1, 1]
    u0, u1 = ubar[:-1], ubar[1:]
    if jac:
        t, dt, u0, u1 = seed([t, dt, u0, u1], 4)
    H = u1 - u0
    Ab, Bb = P.inverse_coefficients(t, dt, u0)
    bad = inverse_radicand_min(Ab, Bb, dt, H) <= 0
    if bad.any():
        raise _Singular(int(np.flatnonzero(bad)[0]))
    v, d, _, _ = inverse_series(Ab, Bb, dt, t, H, tol, nmax)
    r = np.column_stack([Y[1:, 0] - value_of(v), Y[1:, 1] - value_of(d)])
    if not jac:
        return r, None
    return r, (-tangent_of(v, 4), -tangent_of(d, 4))


class _Triplets:
    def __init__(self):
        self.rows, self.cols, self.vals = [], [], []

    def add(self, r, c, v):
        r, c, v = np.broadcast_arrays(np.asarray(r), np.asarray(c), np.asarray(v, dtype=float))
        self.rows.append(r.ravel())
        self.cols.append(c.ravel())
        self.vals.append(v.ravel())

    def banded(self, n):
        r = np.concatenate(self.rows)
        c = np.concatenate(self.cols)
        v = np.concatenate(self.vals)
        off = c - r
        lo, up = int(max(0, -off.min())), int(max(0, off.max()))
        ab = np.zeros((lo + up + 1, n))
        np.add.at(ab, (up + r - c, c), v)
        return (lo, up), ab


def _step_entries(T, row0, col0, blocks, nk, extra=()):
    """Jacobian entries for ``nk`` propagation intervals starting at residual
    row ``row0`` whose knot ``k`` occupies columns ``col0 + 2k, +1``.
    ``extra`` lists ``(seed_index, interval, column)`` for abscissa unknowns."""
    k = np.arange(nk)
    for j, blk in enumerate(blocks):
        rows = row0 + 2 * k + j
        T.add(rows, col0 + 2 * (k + 1) + j, 1.0)
        T.add(rows, col0 + 2 * k, blk[:, 0])
        T.add(rows, col0 + 2 * k + 1, blk[:, 1])
        for s, kk, col in extra:
            T.add(row0 + 2 * kk + j, col, blk[kk, s])


def assemble_residual_and_jacobian(mesh: HybridMesh, instance: Optional[ProblemInstance] = None,
                                   jacobian=True, tol=SERIES_TOL, max_terms=MAX_TERMS):
    """Residual vector and banded Jacobian ``((l, u), ab)`` in the layout of
    :func:`scipy.linalg.solve_banded`.  ``instance`` may be given to evaluate
    a mesh against a different problem than the one it carries."""
    P = canonical(instance)[1] if instance is not None else mesh.problem
    n1, n2 = len(mesh.ts) - 1, len(mesh.ubar) - 1
    off_i = 2 * (n1 + 1)
    off_t = off_i + 2 * (n2 + 1)
    c1 = mesh.critical_t[0]
    try:
        rs, js = _straight_block(P, mesh.ts, mesh.Ys, tol, max_terms, jacobian)
        ri, ji = _inverse_block(P, mesh.ubar, mesh.Yi, tol, max_terms, jacobian)
        if mesh.interior:
            rt, jt = _straight_block(P, mesh.tt, mesh.Yt, tol, max_terms, jacobian)
    except _Singular as e:
        raise AssemblyError(f"inverse step singular on interval {e.k} (u = {mesh.ubar[e.k]:.17g})") from None

    res = [np.array([mesh.Ys[0, 0] - P.u_a]), rs.ravel(),
           np.array([mesh.Yi[0, 0] - c1, mesh.Yi[0, 1] * mesh.Ys[-1, 1] - 1.0]), ri.ravel()]
    if mesh.interior:
        c2 = mesh.critical_t[1]
        res += [np.array([mesh.Yi[-1, 0] - c2, mesh.Yi[-1, 1] * mesh.Yt[0, 1] - 1.0]), rt.ravel(),
                np.array([mesh.Yt[-1, 0] - P.u_b])]
    else:
        res.append(np.array([mesh.Yi[-1, 0] - P.b]))
    r = np.concatenate(res)
    bad = ~np.isfinite(r)
    if bad.any():
        raise AssemblyError(f"non-finite residual: {_describe_row(mesh, int(np.flatnonzero(bad)[0]))}")
    if not jacobian:
        return r, None

    T = _Triplets()
    T.add(0, 0, 1.0)
    _step_entries(T, 1, 0, js, n1)
    ro = 1 + 2 * n1
    T.add(ro, off_i, 1.0)
    T.add(ro + 1, off_i + 1, mesh.Ys[-1, 1])
    T.add(ro + 1, 2 * n1 + 1, mesh.Yi[0, 1])
    extra = [(2, 0, 2 * n1)]
    if mesh.interior:
        extra.append((3, n2 - 1, off_t))
    _step_entries(T, ro + 2, off_i, ji, n2, extra)
    re = ro + 2 + 2 * n2
    if mesh.interior:
        m = len(mesh.tt) - 1
        T.add(re, off_i + 2 * n2, 1.0)
        T.add(re + 1, off_i + 2 * n2 + 1, mesh.Yt[0, 1])
        T.add(re + 1, off_t + 1, mesh.Yi[-1, 1])
        _step_entries(T, re + 2, off_t, jt, m)
        T.add(re + 2 + 2 * m, off_t + 2 * m, 1.0)
    else:
        T.add(re, off_i + 2 * n2, 1.0)
    return r, T.banded(len(r))


def _describe_row(mesh, row):
    n1, n2 = len(mesh.ts) - 1, len(mesh.ubar) - 1
    if row == 0:
        return "left boundary row"
    if row <= 2 * n1:
        return f"straight interval {(row - 1) // 2} (x = {mesh.orientation.x(mesh.ts[(row - 1) // 2]):.17g})"
    row -= 1 + 2 * n1
    if row < 2:
        return "matching rows at the first critical point"
    row -= 2
    if row < 2 * n2:
        return f"inverse interval {row // 2} (u = {mesh.orientation.u(mesh.ubar[row // 2]):.17g})"
    return "tail / far boundary rows"


def residual_norm(mesh, tol=SERIES_TOL, max_terms=MAX_TERMS):
    try:
        r, _ = assemble_residual_and_jacobian(mesh, jacobian=False, tol=tol, max_terms=max_terms)
    except AssemblyError:
        return math.inf
    return float(np.max(np.abs(r)))


# ---------------------------------------------------------------------------
# mesh refinement


def _subdivide(knots, states, P, kind, limit):
    """Insert equally spaced knots into every gap exceeding ``limit``;
    states come from the local step function."""
    gaps = np.diff(knots)
    wide = np.flatnonzero(gaps > limit)
    if wide.size == 0:
        return knots, states
    new_k, new_s = [knots[: wide[0] + 1]], [states[: wide[0] + 1]]
    for n, i in enumerate(wide):
        m = int(math.ceil(gaps[i] / limit * (1 - 1e-12)))
        s = gaps[i] * np.arange(1, m) / m
        a = np.full(m - 1, states[i, 0])
        b = np.full(m - 1, states[i, 1])
        x0 = np.full(m - 1, knots[i])
        if kind == "straight":
            A, B, E, F = P.straight_coefficients(a, b, x0)
            v, d, _, _ = straight_series(A, B, b, a, E, F, s)
        else:
            Ab, Bb = P.inverse_coefficients(a, b, x0)
            v, d, _, _ = inverse_series(Ab, Bb, b, a, s)
        new_k.append(knots[i] + s)
        new_s.append(np.column_stack([v, d]))
        stop = wide[n + 1] + 1 if n + 1 < wide.size else len(knots)
        new_k.append(knots[i + 1: stop])
        new_s.append(states[i + 1: stop])
    return np.concatenate(new_k), np.concatenate(new_s)


def _collapse(mesh, floor):
    """Drop inverse knots overrun by a moving end abscissa."""
    ubar, Yi = mesh.ubar, mesh.Yi
    keep = np.ones(len(ubar), dtype=bool)
    # first interval: knots with ubar <= ubar[0] + floor
    k = 1
    while k < len(ubar) - 1 and ubar[k] <= ubar[0] + floor:
        keep[k] = False
        k += 1
    if mesh.interior:
        k = len(ubar) - 2
        while k > 0 and keep[k] and ubar[k] >= ubar[-1] - floor:
            keep[k] = False
            k -= 1
    if keep.all():
        return mesh
    return replace(mesh, ubar=ubar[keep], Yi=Yi[keep])


def refine_mesh(mesh: HybridMesh, h: Optional[float] = None, trigger: Optional[float] = None) -> HybridMesh:
    """Split every gap wider than ``trigger * h`` (default: wider than ``h``)
    into equal pieces no wider than ``h``; returns the input unchanged when no
    gap qualifies.  Inverse knots overrun by a moving end abscissa are
    dropped first."""
    h = mesh.h if h is None else h
    limit = h if trigger is None else trigger * h
    out = _collapse(mesh, 1e-2 * h)
    P = out.problem
    ts, Ys = out.ts, out.Ys
    ubar, Yi = out.ubar, out.Yi
    tt, Yt = out.tt, out.Yt
    changed = out is not mesh
    if np.any(np.diff(ts) > limit):
        ts, Ys = _subdivide(ts, Ys, P, "straight", h)
        changed = True
    if np.any(np.diff(ubar) > limit):
        ubar, Yi = _subdivide(ubar, Yi, P, "inverse", h)
        changed = True
    if out.interior and np.any(np.diff(tt) > limit):
        tt, Yt = _subdivide(tt, Yt, P, "straight", h)
        changed = True
    if not changed:
        return mesh
    return replace(out, ts=ts, Ys=Ys, ubar=ubar, Yi=Yi, tt=tt, Yt=Yt, history=list(mesh.history))


# ---------------------------------------------------------------------------
# Newton


def newton_solve(guess, instance: Optional[ProblemInstance] = None, cfg: Optional[NewtonConfig] = None) -> HybridMesh:
    """Damped Newton on the hybrid system starting from a shooting
    trajectory or a mesh.

    Each iterate is refined when a gap drifts past ``refine_factor * h``.
    The returned mesh carries ``history``: one dict per iteration.
    """
    cfg = cfg or NewtonConfig()
    if isinstance(guess, Trajectory):
        mesh = mesh_from_trajectory(guess, instance)
    elif instance is not None:
        mesh = reseed(guess, instance)
    else:
        mesh = replace(guess, history=[])
    tol, nmax = cfg.series_tol, cfg.max_terms
    history = []
    step_norm = math.inf
    for it in range(cfg.max_iters + 1):
        try:
            r, (lu, ab) = assemble_residual_and_jacobian(mesh, tol=tol, max_terms=nmax)
        except AssemblyError as e:
            raise NewtonDivergedError(f"assembly failed at iteration {it}: {e}", math.inf, history) from e
        rn = float(np.max(np.abs(r)))
        if rn <= cfg.tol_residual and step_norm <= cfg.tol_step:
            break
        if it == cfg.max_iters:
            raise NewtonDivergedError(
                f"no convergence in {cfg.max_iters} iterations (residual {rn:.3e})", rn, history)
        try:
            with np.errstate(all="raise"):
                dz = solve_banded(lu, ab, -r, check_finite=False)
        except (np.linalg.LinAlgError, ValueError, FloatingPointError) as e:
            raise LinearSolveError(f"banded solve failed at iteration {it}: {e}") from e
        z = mesh.pack()
        lam, trial, tn = 1.0, None, math.inf
        for _ in range(cfg.max_halvings + 1):
            cand = mesh.unpack(z + lam * dz)
            tn = residual_norm(cand, tol, nmax)
            if tn <= (1.0 - 1e-4 * lam) * rn:
                trial = cand
                break
            lam *= cfg.damping
        if trial is None:
            if not math.isfinite(tn):
                raise NewtonDivergedError(f"line search failed at iteration {it}", rn, history)
            trial = cand
        step_norm = lam * float(np.max(np.abs(dz)) / max(1.0, np.max(np.abs(z))))
        n_before = trial.n_unknowns
        mesh = refine_mesh(trial, trial.h, cfg.refine_factor)
        history.append(dict(iteration=it, residual=rn, step=step_norm, damping=lam,
                            unknowns=mesh.n_unknowns, refined=mesh.n_unknowns != n_before))
        log.debug("newton %d: |r|=%.3e |dz|=%.3e lam=%g n=%d", it, rn, step_norm, lam, mesh.n_unknowns)
    history.append(dict(iteration=it, residual=rn, step=step_norm, damping=0.0,
                        unknowns=mesh.n_unknowns, refined=False))
    mesh.history = history
    return mesh


# ---------------------------------------------------------------------------
# pipeline


def sample_profile(mesh: HybridMesh, per_interval: int = 1) -> SolutionProfile:
    """Knots plus ``per_interval`` equally spaced interior samples per
    interval, evaluated with the local step functions."""
    frac = np.arange(1, per_interval + 1) / (per_interval + 1)

    def fill(knots):
        inner = (knots[:-1, None] + np.diff(knots)[:, None] * frac[None, :]).ravel()
        return np.sort(np.concatenate([knots, inner]))

    o = mesh.orientation
    xs = o.x(fill(mesh.ts))
    u, du = mesh.straight_at(xs)
    straight = np.column_stack([xs, u, du])
    us = o.u(fill(mesh.ubar))
    x, dx = mesh.inverse_at(us)
    inverse = np.column_stack([us, x, dx])
    tail = np.empty((0, 3))
    if mesh.interior:
        xt = o.x(fill(mesh.tt))
        ut, dut = mesh.straight_at(xt, branch="tail")
        tail = np.column_stack([xt, ut, dut])
    return SolutionProfile(straight, inverse, tail)


def solve(instance: ProblemInstance, shoot_cfg: Optional[ShootConfig] = None,
          newton_cfg: Optional[NewtonConfig] = None, seed: Optional[HybridMesh] = None):
    """Shooting, then Newton, then dense sampling.

    With ``seed`` (a converged mesh of a related instance) Newton starts
    from the seed mesh.  If that fails, shooting is warm-started from the
    seed's initial tangent instead of searching globally.
    """
    shoot_cfg = shoot_cfg or ShootConfig()
    newton_cfg = newton_cfg or NewtonConfig()
    t0 = time.perf_counter()
    mesh = None
    if seed is not None:
        try:
            # a good seed converges quickly; do not spend the full budget on a bad one
            mesh = newton_solve(seed, instance, replace(newton_cfg, max_iters=min(newton_cfg.max_iters, 10)))
        except (NewtonDivergedError, LinearSolveError) as e:
            log.info("%s: Newton from the seed mesh failed (%s); shooting from its tangent",
                     instance.label(), e)
    t1 = time.perf_counter()
    if mesh is None:
        nu0 = float(seed.Ys[0, 1]) if seed is not None else None
        try:
            guess = find_initial_guess(instance, shoot_cfg, nu0)
            if len(guess.inverse) < 2:
                raise ValueError(f"shooting ended with status {guess.status} and no inverse branch")
        except Exception as e:
            raise SolveError("shooting", e) from e
        t1 = time.perf_counter()
        try:
            mesh = newton_solve(guess, instance, newton_cfg)
        except Exception as e:
            raise SolveError("newton", e) from e
    t2 = time.perf_counter()
    log.info("%s: shooting %.2fs, newton %.2fs (%d iterations)", instance.label(), t1 - t0, t2 - t1,
             len(mesh.history) - 1)
    return mesh, sample_profile(mesh)
