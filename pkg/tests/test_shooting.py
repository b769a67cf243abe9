import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sibvp.problems import make_bvpt21, make_bvpt30, make_troesch
from sibvp.shooting import (
    REACHED_BOUNDARY,
    SWITCHED,
    ShootConfig,
    canonical,
    find_initial_guess,
    propagate_straight,
    shoot,
    shoot_interior_layer,
)
from sibvp.taylor import (
    InverseStepParams,
    StraightStepParams,
    eval_inverse_step,
    eval_straight_step,
)
from sibvp.verification import rk_oracle

from conftest import TROESCH_SLOPE


@pytest.fixture(scope="module")
def troesch1_guess():
    return find_initial_guess(make_troesch(1.0), ShootConfig(h=1e-4))


def test_config_validation():
    for bad in (dict(h=0), dict(u_crit=0.5), dict(tol_boundary=0), dict(max_outer_iters=0)):
        with pytest.raises(ValueError):
            ShootConfig(**bad)


def test_zero_tangent_is_equilibrium():
    tr = shoot(make_troesch(5.0), 0.0, ShootConfig(h=1e-3))
    assert tr.status == REACHED_BOUNDARY
    assert np.all(tr.straight_knots[:, 1] == 0.0)
    assert tr.terminal_miss == -1.0


def test_troesch_lambda1_switch(troesch1_guess):
    tr = troesch1_guess
    assert tr.status == SWITCHED
    assert tr.critical == pytest.approx(0.589777, abs=2e-4)
    _, uc, duc = tr.straight_knots[-1]
    assert uc == pytest.approx(0.528283, abs=1e-2)
    assert duc == pytest.approx(1.000001, abs=1e-2)
    assert abs(tr.terminal_miss) <= 1e-8
    # the tangent found by shooting approximates the exact slope
    assert tr.nu == pytest.approx(TROESCH_SLOPE[1], rel=1e-5)


def test_trajectory_invariants(troesch1_guess):
    tr = troesch1_guess
    S, I = tr.straight_knots, tr.inverse_knots
    assert np.all(np.diff(S[:, 0]) > 0)
    assert np.all(np.diff(I[:, 0]) > 0)
    # knot spacings stay within h; steps are arc-length based, so a
    # chord only exceeds h by a curvature term
    assert np.all(np.diff(S[:, 0]) <= tr.h + 1e-12)
    assert np.all(np.diff(I[:, 0]) <= tr.h + 1e-12)
    assert np.all(np.hypot(np.diff(S[:, 0]), np.diff(S[:, 1])) <= tr.h * (1 + 1e-4))
    assert np.all(np.hypot(np.diff(I[:, 0]), np.diff(I[:, 1])) <= tr.h * (1 + 1e-4))
    assert I[-1, 0] == 1.0
    # matching identities at the joint
    assert I[0, 1] == S[-1, 0] and I[0, 2] == 1.0 / S[-1, 2]


def test_consecutive_knots_are_connected(troesch1_guess):
    tr = troesch1_guess
    P = canonical(make_troesch(1.0))[1]
    for i in range(0, len(tr.straight) - 1, 397):
        t, w, dw = tr.straight[i]
        A, B, E, F = P.straight_coefficients(w, dw, t)
        r = eval_straight_step(StraightStepParams(A, B, dw, w, E, F, tr.straight[i + 1, 0] - t))
        assert r.value == pytest.approx(tr.straight[i + 1, 1], rel=1e-14)
        assert r.derivative == pytest.approx(tr.straight[i + 1, 2], rel=1e-14)
    for i in range(0, len(tr.inverse) - 1, 397):
        w, t, dt = tr.inverse[i]
        Ab, Bb = P.inverse_coefficients(t, dt, w)
        r = eval_inverse_step(InverseStepParams(Ab, Bb, dt, t, tr.inverse[i + 1, 0] - w))
        assert r.value == pytest.approx(tr.inverse[i + 1, 1], rel=1e-14)
        assert r.derivative == pytest.approx(tr.inverse[i + 1, 2], rel=1e-14)


def test_bvpt21_marches_from_the_right():
    tr = find_initial_guess(make_bvpt21(1e-2), ShootConfig(h=1e-4))
    assert tr.status == SWITCHED
    assert tr.critical == pytest.approx(0.230238, abs=1e-2)
    S = tr.straight_knots
    assert S[0, 0] == 1.0 and S[-1, 0] == pytest.approx(tr.critical)
    assert S[-1, 2] == pytest.approx(-1.0, abs=1e-2)


def test_nonstiff_instance_stays_straight():
    inst = make_troesch(0.1)
    tr = find_initial_guess(inst, ShootConfig(h=1e-3, u_crit=10.0))
    assert tr.status == REACHED_BOUNDARY and len(tr.inverse) == 0
    sol = rk_oracle(inst.problem.rhs, (0.0, tr.nu), (0.0, 1.0), tol=1e-12)
    x = np.linspace(0, 1, 201)
    assert np.max(np.abs(sol(x)[1])) < 10
    assert sol(1.0)[0] == pytest.approx(1.0, abs=1e-8)


def test_interior_layer_switches_twice():
    inst = make_bvpt30(5e-2)
    tr = find_initial_guess(inst, ShootConfig(h=1e-4, u_crit=2.0))
    c1, c2 = tr.critical
    assert c1 == pytest.approx(0.16, abs=1e-2)
    assert c2 == pytest.approx(0.509, abs=1e-2)
    assert np.all(np.diff(tr.inverse_knots[:, 0]) > 0)
    assert tr.tail_knots[-1, 0] == 1.0


def test_interior_layer_below_threshold_stays_straight():
    inst = make_bvpt30(5e-2)
    sol_tr = find_initial_guess(inst, ShootConfig(h=1e-3, u_crit=2.0))
    # the largest slope of the solution, from an RK run with the converged tangent
    o = sol_tr.orientation
    sol = rk_oracle(inst.problem.rhs, (inst.problem.u_a, o.slope(sol_tr.nu)), (0.0, 1.0), tol=1e-12)
    top = np.max(np.abs(sol(np.linspace(0, 1, 2001))[1]))
    tr = shoot_interior_layer(inst, sol_tr.nu, ShootConfig(h=1e-3, u_crit=2 * top))
    assert tr.status == REACHED_BOUNDARY and tr.critical is None
    with pytest.raises(ValueError):
        shoot_interior_layer(make_troesch(1.0), 1.0, ShootConfig())


def test_nonfinite_tangent_rejected():
    with pytest.raises(ValueError):
        shoot(make_troesch(1.0), math.nan, ShootConfig())


TANGENTS = st.floats(0.0, 0.04575046140631874 * 1.2)


@settings(max_examples=20, deadline=None)
@given(TANGENTS, TANGENTS)
def test_tangent_monotonicity(a, b):
    """Straight-branch values and slopes are strictly ordered by the tangent."""
    lo, hi = sorted((a, b))
    if hi - lo < 1e-9:
        hi = lo + 1e-6
    inst = make_troesch(5.0)
    t = np.linspace(0.0, 0.7, 701)
    Ylo = propagate_straight(inst, lo, t)
    Yhi = propagate_straight(inst, hi, t)
    assert np.all(Yhi[1:, 0] > Ylo[1:, 0])
    assert np.all(Yhi[:, 1] > Ylo[:, 1])


def test_terminal_miss_monotone_in_tangent():
    inst = make_troesch(5.0)
    cfg = ShootConfig(h=1e-3)
    nus = TROESCH_SLOPE[5] * np.linspace(0.9, 1.1, 9)
    miss = [shoot(inst, nu, cfg).terminal_miss for nu in nus]
    assert np.all(np.diff(miss) < 0)
