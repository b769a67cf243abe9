import cmath
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from sibvp.taylor import (
    InvalidInputError,
    InverseStepParams,
    SingularStepError,
    StraightStepParams,
    eval_inverse_step,
    eval_step_with_sensitivities,
    eval_straight_step,
    inverse_radicand_min,
    inverse_series,
    radicand_min_scalar,
    straight_series,
)
from sibvp.verification import rk_oracle

# closed forms evaluated with 30-digit mpmath
COSH_02 = 1.0200667556190758
TWO_SINH_02 = 0.402672005082188
BERNOULLI_DV = 0.47673129462279614
BERNOULLI_V = 0.097617696340303179


def test_linear_motion():
    r = eval_straight_step(StraightStepParams(0, 0, 2.0, 1.0, s_max=0.5))
    assert (r.value, r.derivative) == (2.0, 2.0)
    assert r.converged and not r.stiff


def test_cosh_case():
    r = eval_straight_step(StraightStepParams(0, 4.0, 0.0, 1.0, s_max=0.1))
    assert r.value == pytest.approx(COSH_02, rel=1e-15)
    assert r.derivative == pytest.approx(TWO_SINH_02, rel=1e-15)


def test_constant_inverse_step():
    r = eval_inverse_step(InverseStepParams(3.0, -2.0, 0.0, 0.7, s_max=0.3))
    assert (r.value, r.derivative) == (0.7, 0.0)


def test_bernoulli_closed_form():
    r = eval_inverse_step(InverseStepParams(0.0, -1.0, 0.5, 0.0, s_max=0.2))
    assert r.derivative == pytest.approx(BERNOULLI_DV, rel=1e-14)
    assert r.value == pytest.approx(BERNOULLI_V, rel=1e-14)


def test_invalid_inputs():
    with pytest.raises(InvalidInputError):
        eval_straight_step(StraightStepParams(math.nan, 0, 0, 0, s_max=0.1))
    with pytest.raises(InvalidInputError):
        eval_straight_step(StraightStepParams(0, 0, 0, 0, s_max=0.0))
    with pytest.raises(InvalidInputError):
        eval_inverse_step(InverseStepParams(0, 0, math.inf, 0, s_max=0.1))
    with pytest.raises(InvalidInputError):
        eval_straight_step(StraightStepParams(0, 0, 0, 0, s_max=0.1), tol=0.0)
    with pytest.raises(InvalidInputError):
        eval_straight_step(StraightStepParams(0, 0, 0, 0, s_max=0.1), max_terms=3)
    with pytest.raises(InvalidInputError):
        eval_step_with_sensitivities("sideways", StraightStepParams(0, 0, 0, 0, s_max=0.1))


def test_divergence_is_reported_not_raised():
    r = eval_straight_step(StraightStepParams(0, 1e6, 1.0, 1.0, s_max=1.0))
    assert not r.converged and r.stiff


def test_stiffness_signal_from_term_count():
    r = eval_straight_step(StraightStepParams(0, 900.0, 1.0, 1.0, s_max=1.0))
    assert r.terms_used > 48 or not r.converged
    assert r.stiff


def test_singular_inverse_step():
    # 1 - 2 C^2 B s crosses zero at s = 0.5
    with pytest.raises(SingularStepError):
        eval_inverse_step(InverseStepParams(0.0, 1.0, 1.0, 0.0, s_max=0.6))
    assert radicand_min_scalar(0.0, 1.0, 1.0, 0.6) < 0
    # interior vertex of the quadratic radicand
    assert radicand_min_scalar(-10.0, 2.0, 1.0, 0.3) == pytest.approx(1 - 2 * (0.5 * -10 * 0.04 + 2 * 0.2))
    np.testing.assert_allclose(inverse_radicand_min(np.array([-10.0]), np.array([2.0]), np.array([1.0]), 0.3),
                               radicand_min_scalar(-10.0, 2.0, 1.0, 0.3))


def test_series_beyond_radius_is_flagged():
    # radicand positive on [0, H] but with a root at s = -1/48, inside |s| < H
    r = eval_inverse_step(InverseStepParams(0.0, -6.0, 2.0, 0.0, s_max=0.03125))
    assert not r.converged and r.stiff


def test_converged_flag_respects_tolerance():
    # the sum of the remaining terms is tiny relative to the value
    r = eval_straight_step(StraightStepParams(1.0, 2.0, 0.5, 1.0, 0.3, 0.1, s_max=0.05))
    full = eval_straight_step(StraightStepParams(1.0, 2.0, 0.5, 1.0, 0.3, 0.1, s_max=0.05), tol=1e-30,
                              max_terms=200)
    assert r.converged
    assert abs(r.value - full.value) <= 1e-15 * max(1, abs(full.value))


# ---------------------------------------------------------------------------
# oracle equivalence

COEF = st.floats(-10, 10)
SMAX = st.floats(1e-4, 0.05)


def _radius(Ab, Bb, Cb):
    """Distance from 0 to the nearest complex root of the Bernoulli radicand
    ``1 - 2 C^2 (A s^2 / 2 + B s)``, i.e. the radius of convergence of the
    series for ``V'``."""
    # with t = 1/s the roots solve t^2 + b t + a = 0
    c2 = Cb * Cb
    a, b = -c2 * Ab, -2.0 * c2 * Bb
    disc = cmath.sqrt(b * b - 4 * a)
    tmax = max(abs(-b + disc), abs(-b - disc)) / 2
    return math.inf if tmax == 0 else 1.0 / tmax


def _rk_straight(p):
    rhs = lambda U, dU, s: (p.A * s + p.B) * U + p.E * s + p.F
    sol = rk_oracle(rhs, (p.D, p.C), (0.0, p.s_max), tol=1e-13, atol=1e-16)
    return sol(p.s_max)


def _rk_inverse(p):
    rhs = lambda V, dV, s: (p.Abar * s + p.Bbar) * dV ** 3
    sol = rk_oracle(rhs, (p.Dbar, p.Cbar), (0.0, p.s_max), tol=1e-13, atol=1e-16)
    return sol(p.s_max)


@settings(max_examples=1000, deadline=None)
@given(COEF, COEF, COEF, COEF, COEF, COEF, SMAX)
def test_straight_step_matches_rk(A, B, C, D, E, F, s):
    p = StraightStepParams(A, B, C, D, E, F, s)
    r = eval_straight_step(p)
    u, du = _rk_straight(p)
    assert abs(r.value - u) <= 1e-10 * max(1, abs(u))
    assert abs(r.derivative - du) <= 1e-10 * max(1, abs(du))


@settings(max_examples=1000, deadline=None)
@given(COEF, COEF, COEF, COEF, SMAX)
def test_inverse_step_matches_rk(Ab, Bb, Cb, Db, s):
    # non-singular regime, and inside the radius of convergence of the series
    assume(radicand_min_scalar(Ab, Bb, Cb, s) > 0.05)
    assume(_radius(Ab, Bb, Cb) > 3.0 * s)
    p = InverseStepParams(Ab, Bb, Cb, Db, s)
    r = eval_inverse_step(p)
    assert r.converged
    v, dv = _rk_inverse(p)
    assert abs(r.value - v) <= 1e-10 * max(1, abs(v))
    assert abs(r.derivative - dv) <= 1e-10 * max(1, abs(dv))


# ---------------------------------------------------------------------------
# sensitivities


def test_trivial_sensitivities():
    res, sens = eval_step_with_sensitivities("straight", StraightStepParams(0, 0, 2.0, 1.0, s_max=0.5))
    d = dict(zip(sens.names, sens.value_partials))
    assert d["D"] == 1.0 and d["C"] == 0.5
    assert sens.names == ("A", "B", "C", "D", "E", "F")
    res, sens = eval_step_with_sensitivities("inverse", InverseStepParams(1.0, 2.0, 0.0, 0.3, s_max=0.1))
    d = dict(zip(sens.names, sens.value_partials))
    assert d["Abar"] == 0.0 and d["Bbar"] == 0.0
    assert len(sens.derivative_partials) == 4


def test_cosh_sensitivity_in_B():
    p = StraightStepParams(0, 4.0, 0.0, 1.0, s_max=0.1)
    _, sens = eval_step_with_sensitivities("straight", p)
    eps = 1e-6
    up = eval_straight_step(StraightStepParams(0, 4.0 + eps, 0.0, 1.0, s_max=0.1)).value
    dn = eval_straight_step(StraightStepParams(0, 4.0 - eps, 0.0, 1.0, s_max=0.1)).value
    assert sens.value_partials[1] == pytest.approx((up - dn) / (2 * eps), rel=1e-6)


def _fd(kind, p, name, eps=1e-6):
    ev = eval_straight_step if kind == "straight" else eval_inverse_step
    v = getattr(p, name)
    h = eps * max(1.0, abs(v))
    hi = ev(type(p)(**{**p.__dict__, name: v + h}))
    lo = ev(type(p)(**{**p.__dict__, name: v - h}))
    return (hi.value - lo.value) / (2 * h), (hi.derivative - lo.derivative) / (2 * h)


@settings(max_examples=100, deadline=None)
@given(COEF, COEF, COEF, COEF, COEF, COEF, SMAX)
def test_straight_sensitivities_match_fd(A, B, C, D, E, F, s):
    p = StraightStepParams(A, B, C, D, E, F, s)
    res, sens = eval_step_with_sensitivities("straight", p)
    plain = eval_straight_step(p)
    assert (res.value, res.derivative) == (plain.value, plain.derivative)
    for i, name in enumerate(sens.names):
        fv, fd = _fd("straight", p, name)
        assert sens.value_partials[i] == pytest.approx(fv, rel=1e-6, abs=1e-8)
        assert sens.derivative_partials[i] == pytest.approx(fd, rel=1e-6, abs=1e-8)


@settings(max_examples=100, deadline=None)
@given(COEF, COEF, COEF, COEF, SMAX)
def test_inverse_sensitivities_match_fd(Ab, Bb, Cb, Db, s):
    assume(radicand_min_scalar(Ab, Bb, Cb, s) > 0.05)
    assume(_radius(Ab, Bb, Cb) > 3.0 * s)
    p = InverseStepParams(Ab, Bb, Cb, Db, s)
    res, sens = eval_step_with_sensitivities("inverse", p)
    plain = eval_inverse_step(p)
    assert (res.value, res.derivative) == (plain.value, plain.derivative)
    for i, name in enumerate(sens.names):
        fv, fd = _fd("inverse", p, name)
        assert sens.value_partials[i] == pytest.approx(fv, rel=1e-6, abs=1e-7)
        assert sens.derivative_partials[i] == pytest.approx(fd, rel=1e-6, abs=1e-7)


# ---------------------------------------------------------------------------
# structural properties


@settings(max_examples=200, deadline=None)
@given(COEF, COEF, COEF, COEF, COEF, COEF, SMAX, st.floats(1e-4, 0.05))
def test_straight_semigroup(A, B, C, D, E, F, s, t):
    """Continuing with the same frozen coefficient line composes exactly."""
    one = eval_straight_step(StraightStepParams(A, B, C, D, E, F, s))
    two = eval_straight_step(StraightStepParams(A, B + A * s, one.derivative, one.value, E, F + E * s, t))
    full = eval_straight_step(StraightStepParams(A, B, C, D, E, F, s + t))
    assert abs(two.value - full.value) <= 1e-12 * max(1, abs(full.value))
    assert abs(two.derivative - full.derivative) <= 1e-12 * max(1, abs(full.derivative))


@settings(max_examples=50, deadline=None)
@given(COEF, COEF, COEF, COEF)
def test_terms_used_monotone_in_step(A, B, C, D):
    grid = np.linspace(1e-3, 0.5, 40)
    n = [eval_straight_step(StraightStepParams(A, B, C, D, 0.0, 0.0, s)).terms_used for s in grid]
    assert all(b >= a for a, b in zip(n, n[1:]))


def test_vectorized_kernels_match_scalar():
    rng = np.random.default_rng(0)
    P = rng.uniform(-5, 5, (6, 50))
    H = rng.uniform(1e-3, 0.05, 50)
    v, d, n, ok = straight_series(*P, H)
    for i in range(50):
        r = eval_straight_step(StraightStepParams(*P[:, i], H[i]))
        assert (v[i], d[i], n[i], ok[i]) == (r.value, r.derivative, r.terms_used, r.converged)
    Q = rng.uniform(-2, 2, (4, 50))
    v, d, n, ok = inverse_series(*Q, H)
    for i in range(50):
        r = eval_inverse_step(InverseStepParams(*Q[:, i], H[i]))
        assert (v[i], d[i]) == (r.value, r.derivative)
