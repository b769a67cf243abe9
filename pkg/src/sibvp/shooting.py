"""Single shooting with straight/inverse step functions.

All marching happens in a canonical frame in which the solution is traced
left to right and increases (see :class:`sibvp.problems.Orientation`).  The
march starts on the straight branch with trial tangent ``nu``; once the slope
reaches ``u_crit`` (or a step becomes too expensive) the state is converted
to the inverse function ``x(u)`` and marched in ``u`` up to the far boundary
value.  For interior layers the march switches back to the straight branch
once ``x'(u)`` exceeds ``1/u_crit``.

Step lengths are measured along the curve: a straight step covers
``dx = h / sqrt(1 + u'^2)`` and an inverse step ``du = h / sqrt(1 + x'^2)``
so that every chord is at most ``h`` long in the ``(x, u)`` plane.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .problems import BvpProblem, Orientation, ProblemInstance
from .taylor import (
    MAX_TERMS,
    SERIES_TOL,
    STIFF_TERMS,
    inverse_scalar,
    radicand_min_scalar,
    straight_scalar,
)

__all__ = [
    "ShootConfig",
    "Trajectory",
    "NoBracketError",
    "ShootingFailedError",
    "canonical",
    "shoot",
    "shoot_interior_layer",
    "find_initial_guess",
    "propagate_straight",
]

log = logging.getLogger(__name__)

REACHED_BOUNDARY = "reached_boundary"
SWITCHED = "switched_to_inverse"
SINGULAR = "singular_step"
DIVERGED = "diverged"


class NoBracketError(RuntimeError):
    pass


class ShootingFailedError(RuntimeError):
    pass


@dataclass(frozen=True)
class ShootConfig:
    h: float = 1e-4
    u_crit: float = 1.0
    tol_boundary: float = 1e-8
    max_outer_iters: int = 100
    series_tol: float = SERIES_TOL
    max_terms: int = MAX_TERMS
    # solve on a coarse-to-fine ladder of h, bracketing each level around
    # the previous root
    multilevel: bool = True

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")
        if not self.u_crit >= 1:
            raise ValueError(f"u_crit must be at least 1, got {self.u_crit}")
        if not self.tol_boundary > 0:
            raise ValueError(f"tol_boundary must be positive, got {self.tol_boundary}")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be at least 1")


@dataclass
class Trajectory:
    """One shooting pass.

    ``straight``, ``inverse`` and ``tail`` are ``(n, 3)`` arrays in the
    canonical frame: rows ``(t, w, w')`` on straight branches and
    ``(w, t, t')`` on the inverse branch.  ``critical`` holds physical
    abscissae; ``critical_t`` the canonical ones.  ``terminal_miss`` is
    ``t(w_b) - b`` when the inverse branch lands on the far value, otherwise
    ``w(b) - w_b`` (canonical frame).
    """

    nu: float
    h: float
    u_crit: float
    orientation: Orientation
    straight: np.ndarray
    inverse: np.ndarray
    tail: Optional[np.ndarray]
    critical_t: tuple
    terminal_miss: float
    status: str
    # positive when nu is too small; used to bracket the root
    undershoot: float = field(default=math.nan, repr=False)

    @property
    def critical(self):
        vals = tuple(self.orientation.x(t) for t in self.critical_t)
        if not vals:
            return None
        return vals[0] if len(vals) == 1 else vals

    @property
    def straight_knots(self):
        """Physical ``(x, u, u')`` rows of the first straight branch."""
        return _physical_straight(self.orientation, self.straight)

    @property
    def inverse_knots(self):
        """Physical ``(u, x, x')`` rows of the inverse branch."""
        return _physical_inverse(self.orientation, self.inverse)

    @property
    def tail_knots(self):
        if self.tail is None:
            return np.empty((0, 3))
        return _physical_straight(self.orientation, self.tail)

    @property
    def complete(self):
        return self.status in (REACHED_BOUNDARY, SWITCHED) and math.isfinite(self.terminal_miss)


def _physical_straight(o: Orientation, arr):
    arr = np.asarray(arr, dtype=float).reshape(-1, 3)
    return np.column_stack([o.x(arr[:, 0]), o.u(arr[:, 1]), o.slope(arr[:, 2])])


def _physical_inverse(o: Orientation, arr):
    arr = np.asarray(arr, dtype=float).reshape(-1, 3)
    return np.column_stack([o.u(arr[:, 0]), o.x(arr[:, 1]), o.inverse_slope(arr[:, 2])])


def canonical(instance: ProblemInstance):
    """``(orientation, problem in canonical frame)`` for an instance."""
    o = Orientation.for_problem(instance.problem)
    return o, o.apply(instance.problem)


# ---------------------------------------------------------------------------
# marching kernels (plain floats)


def _straight_coeffs(P: BvpProblem, w, dw, t):
    return tuple(float(v) for v in P.straight_coefficients(w, dw, t))


def _inverse_coeffs(P: BvpProblem, t, dt, w):
    return tuple(float(v) for v in P.inverse_coefficients(t, dt, w))


def _march_straight(P, t, w, dw, cfg, switch):
    """Straight march from ``(t, w, dw)``.  Returns ``(knots, status)`` where
    status is ``"switch"``, ``"boundary"`` or ``DIVERGED``."""
    b, h, tol, nmax = P.b, cfg.h, cfg.series_tol, cfg.max_terms
    knots = [(t, w, dw)]
    stiff = False
    while True:
        if switch and len(knots) > 1 and (abs(dw) >= cfg.u_crit or stiff):
            return knots, "switch"
        if t >= b:
            return knots, "boundary"
        step = h / math.sqrt(1.0 + dw * dw)
        if t + step >= b:
            step = b - t
        A, B, E, F = _straight_coeffs(P, w, dw, t)
        w, dw, nterms, ok = straight_scalar(A, B, dw, w, E, F, step, tol, nmax)
        t = b if step == b - t else t + step
        stiff = (not ok) or nterms > STIFF_TERMS
        if not (math.isfinite(w) and math.isfinite(dw)):
            return knots, DIVERGED
        knots.append((t, w, dw))


def _march_inverse(P, w, t, dt, w_end, cfg, switch_back):
    """Inverse march in ``w`` up to ``w_end``.  Returns ``(knots, status)``
    with status ``"landed"``, ``"switch"``, ``"lost"`` (t ran far past b),
    ``SINGULAR`` or ``DIVERGED``."""
    h, tol, nmax = cfg.h, cfg.series_tol, cfg.max_terms
    t_far = P.b + (P.b - P.a)
    knots = [(w, t, dt)]
    while True:
        if w >= w_end:
            return knots, "landed"
        if switch_back and len(knots) > 1 and dt >= 1.0 / cfg.u_crit:
            return knots, "switch"
        step = h / math.sqrt(1.0 + dt * dt)
        if w + step >= w_end:
            step = w_end - w
        Ab, Bb = _inverse_coeffs(P, t, dt, w)
        if radicand_min_scalar(Ab, Bb, dt, step) <= 0:
            return knots, SINGULAR
        t, dt, _, ok = inverse_scalar(Ab, Bb, dt, t, step, tol, nmax)
        w = w_end if step == w_end - w else w + step
        if not (math.isfinite(t) and math.isfinite(dt)) or dt <= 0:
            return knots, DIVERGED
        knots.append((w, t, dt))
        if t > t_far:
            return knots, "lost"


def _arr(knots):
    return np.array(knots, dtype=float).reshape(-1, 3)


def _shoot(instance, nu, cfg, interior):
    o, P = canonical(instance)
    nu = float(nu)
    kw = dict(nu=nu, h=cfg.h, u_crit=cfg.u_crit, orientation=o)
    empty = np.empty((0, 3))
    st, status = _march_straight(P, P.a, P.u_a, nu, cfg, switch=True)
    S = _arr(st)
    if status == DIVERGED:
        return Trajectory(straight=S, inverse=empty, tail=None, critical_t=(), terminal_miss=math.nan,
                          status=DIVERGED, undershoot=-math.inf, **kw)
    if status == "boundary":
        miss = S[-1, 1] - P.u_b
        return Trajectory(straight=S, inverse=empty, tail=None, critical_t=(), terminal_miss=miss,
                          status=REACHED_BOUNDARY, undershoot=-miss, **kw)
    t_c, w_c, dw_c = st[-1]
    if dw_c <= 0:
        # a steep descent cannot be continued toward the far value
        return Trajectory(straight=S, inverse=empty, tail=None, critical_t=(t_c,), terminal_miss=math.nan,
                          status=DIVERGED, undershoot=math.inf, **kw)
    if w_c >= P.u_b:
        # crossed the far value before the slope became critical: overshoot
        return Trajectory(straight=S, inverse=empty, tail=None, critical_t=(t_c,), terminal_miss=t_c - P.b,
                          status=SWITCHED, undershoot=t_c - P.b, **kw)
    inv, istatus = _march_inverse(P, w_c, t_c, 1.0 / dw_c, P.u_b, cfg, switch_back=interior)
    I = _arr(inv)
    crit = (t_c,)
    if istatus == SINGULAR:
        return Trajectory(straight=S, inverse=I, tail=None, critical_t=crit, terminal_miss=math.inf,
                          status=SINGULAR, undershoot=math.inf, **kw)
    if istatus == DIVERGED:
        return Trajectory(straight=S, inverse=I, tail=None, critical_t=crit, terminal_miss=math.nan,
                          status=DIVERGED, undershoot=math.nan, **kw)
    if istatus in ("landed", "lost"):
        miss = I[-1, 1] - P.b
        status = SWITCHED if istatus == "landed" else DIVERGED
        return Trajectory(straight=S, inverse=I, tail=None, critical_t=crit, terminal_miss=miss,
                          status=status, undershoot=miss, **kw)
    # interior layer: back to the straight branch at c2
    w2, t2, dt2 = inv[-1]
    if t2 >= P.b:
        miss = t2 - P.b
        return Trajectory(straight=S, inverse=I, tail=None, critical_t=crit, terminal_miss=miss,
                          status=SWITCHED, undershoot=miss, **kw)
    tl, tstatus = _march_straight(P, t2, w2, 1.0 / dt2, cfg, switch=False)
    T = _arr(tl)
    crit = (t_c, t2)
    if tstatus == DIVERGED:
        return Trajectory(straight=S, inverse=I, tail=T, critical_t=crit, terminal_miss=math.nan,
                          status=DIVERGED, undershoot=-math.inf, **kw)
    miss = T[-1, 1] - P.u_b
    return Trajectory(straight=S, inverse=I, tail=T, critical_t=crit, terminal_miss=miss,
                      status=SWITCHED, undershoot=-miss, **kw)


def shoot(instance: ProblemInstance, nu: float, cfg: ShootConfig) -> Trajectory:
    """March once with trial tangent ``nu`` (canonical frame slope at the
    starting boundary).  Interior-layer instances are routed to
    :func:`shoot_interior_layer`."""
    if not math.isfinite(nu):
        raise ValueError(f"nu must be finite, got {nu}")
    return _shoot(instance, nu, cfg, instance.problem.layer_hint == "interior")


def shoot_interior_layer(instance: ProblemInstance, nu: float, cfg: ShootConfig) -> Trajectory:
    if instance.problem.layer_hint != "interior":
        raise ValueError("shoot_interior_layer needs an instance with layer_hint='interior'")
    if not math.isfinite(nu):
        raise ValueError(f"nu must be finite, got {nu}")
    return _shoot(instance, nu, cfg, True)


def propagate_straight(instance: ProblemInstance, nu: float, t_knots, cfg: Optional[ShootConfig] = None):
    """Straight-branch states ``(w, w')`` on the given canonical knots, with
    no switching.  Used to compare trajectories on a shared mesh."""
    cfg = cfg or ShootConfig()
    _, P = canonical(instance)
    t_knots = np.asarray(t_knots, dtype=float)
    out = np.empty((len(t_knots), 2))
    w, dw = P.u_a, float(nu)
    out[0] = w, dw
    for i in range(1, len(t_knots)):
        t = t_knots[i - 1]
        A, B, E, F = _straight_coeffs(P, w, dw, t)
        w, dw, _, _ = straight_scalar(A, B, dw, w, E, F, t_knots[i] - t, cfg.series_tol, cfg.max_terms)
        out[i] = w, dw
    return out


# ---------------------------------------------------------------------------
# outer search over nu


class _Found(Exception):
    def __init__(self, traj):
        self.traj = traj


class _Objective:
    """Cached ``undershoot(nu)`` with early exit once the boundary miss is
    within tolerance."""

    def __init__(self, instance, cfg):
        self.instance, self.cfg = instance, cfg
        self.cache = {}
        self.best = None
        self.calls = 0
        b_a = instance.problem.b - instance.problem.a
        self.sentinel = 1e3 * b_a

    def traj(self, nu):
        if nu not in self.cache:
            self.calls += 1
            if self.calls > 4 * self.cfg.max_outer_iters:
                raise ShootingFailedError(f"no acceptable tangent after {self.calls - 1} shots")
            tr = shoot(self.instance, nu, self.cfg)
            self.cache[nu] = tr
            log.debug("shot nu=%.17g status=%s miss=%.3e", nu, tr.status, tr.terminal_miss)
            if tr.complete and (self.best is None or abs(tr.terminal_miss) < abs(self.best.terminal_miss)):
                self.best = tr
        return self.cache[nu]

    def __call__(self, nu, stop=True):
        tr = self.traj(nu)
        if stop and tr.complete and abs(tr.terminal_miss) <= self.cfg.tol_boundary:
            raise _Found(tr)
        u = tr.undershoot
        if math.isnan(u):
            raise ShootingFailedError(f"shot at nu={nu} failed with status {tr.status}")
        return max(-self.sentinel, min(self.sentinel, u))


def _global_bracket(f, instance, cfg):
    """``(lo, hi)`` with ``f(lo) > 0 > f(hi)``, bracketing from
    ``[0, K * span / (b - a)]`` with doubling ``K`` and a geometric search
    toward zero (step factors 2, 4, 8, ...)."""
    o, P = canonical(instance)
    span = abs(P.u_b - P.u_a) or 1.0
    hi = span / (P.b - P.a)
    for _ in range(cfg.max_outer_iters):
        if f(hi) < 0:
            break
        hi *= 2.0
    else:
        raise NoBracketError(f"no overshooting tangent below {hi:g}")
    # accelerating steps toward zero: tiny roots arise for layers whose far
    # boundary value underflows toward zero
    lo = hi
    for k in range(1, cfg.max_outer_iters + 1):
        cand = lo / 2.0 ** min(k, 64)
        if cand < 1e-300:
            break
        if f(cand) > 0:
            return cand, lo
        lo = cand
    if f(0.0) > 0:
        return 0.0, lo
    raise NoBracketError("no undershooting tangent found down to nu = 0")


def _local_bracket(f, nu0, cfg):
    """Bracket near a coarse-level root by expanding geometrically in log nu."""
    y0 = math.log(nu0)
    width = 1e-3 * max(abs(y0), 1e-6)
    for _ in range(cfg.max_outer_iters):
        lo, hi = math.exp(y0 - width), math.exp(y0 + width)
        flo, fhi = f(lo), f(hi)
        if flo > 0 > fhi:
            return lo, hi
        if flo < 0:
            y0 -= width
        elif fhi > 0:
            y0 += width
        width *= 4.0
        if width > 50:
            break
    return None


def _solve_level(instance, cfg, nu_guess=None):
    f = _Objective(instance, cfg)
    rtol = 4 * np.finfo(float).eps
    try:
        br = _local_bracket(f, nu_guess, cfg) if nu_guess else None
        lo, hi = br if br is not None else _global_bracket(f, instance, cfg)
        if lo > 0:
            y = brentq(lambda y: f(math.exp(y)), math.log(lo), math.log(hi), xtol=1e-300, rtol=rtol,
                       maxiter=cfg.max_outer_iters)
            f(math.exp(y))
        else:
            f(brentq(f, lo, hi, xtol=1e-300, rtol=rtol, maxiter=cfg.max_outer_iters))
    except _Found as e:
        return e.traj
    except NoBracketError:
        if f.best is None:
            raise ShootingFailedError("every trial tangent failed") from None
        raise
    except RuntimeError as e:
        # out of iterations, or root isolated to machine precision with the
        # miss still above tolerance
        log.debug("outer search stopped: %s", e)
    if f.best is None:
        raise ShootingFailedError("no complete trajectory found")
    log.warning("boundary miss %.3e above tolerance %.1e at h=%g; using closest shot",
                abs(f.best.terminal_miss), cfg.tol_boundary, cfg.h)
    return f.best


def _ladder(h):
    hs = [h]
    while hs[-1] * 4 <= 1e-2:
        hs.append(hs[-1] * 4)
    return hs[::-1]


def find_initial_guess(instance: ProblemInstance, cfg: ShootConfig, nu_guess: Optional[float] = None) -> Trajectory:
    """Shoot repeatedly on ``nu`` until the far boundary condition is met to
    ``cfg.tol_boundary``; returns the accepted trajectory.

    ``nu_guess`` (a canonical initial tangent, e.g. from a related solve)
    is tried first with a local bracket at the target ``h``.
    """
    if nu_guess is not None and nu_guess > 0:
        sub = replace(cfg, multilevel=False)
        try:
            return _solve_level(instance, sub, nu_guess)
        except (NoBracketError, ShootingFailedError) as e:
            log.info("warm start from nu=%g failed (%s); full search", nu_guess, e)
    levels = _ladder(cfg.h) if cfg.multilevel else [cfg.h]
    nu = None
    tr = None
    for hk in levels:
        sub = replace(cfg, h=hk, multilevel=False)
        try:
            tr = _solve_level(instance, sub, nu)
        except (NoBracketError, ShootingFailedError):
            if hk == cfg.h:
                raise
            log.info("coarse level h=%g failed; continuing", hk)
            continue
        nu = tr.nu if tr.nu > 0 else None
        log.info("level h=%g: nu=%.17g miss=%.3e", hk, tr.nu, tr.terminal_miss)
    return tr
