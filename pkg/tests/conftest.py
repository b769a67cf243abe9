import functools

import pytest

from sibvp.hybrid import NewtonConfig, solve
from sibvp.problems import make_problem
from sibvp.shooting import ShootConfig

# exact Troesch slopes u'(0), from 30-digit mpmath quadrature of the first
# integral (independent of the scipy-based reference)
TROESCH_SLOPE = {1: 0.84520268530995106, 5: 0.04575046140631874, 10: 0.00035833778463081369}


@functools.lru_cache(maxsize=None)
def _solved(name, value, h, u_crit):
    pname = {"troesch": "lambda", "bvpt21": "xi", "bvpt30": "xi"}[name]
    inst = make_problem(name, {pname: value})
    mesh, profile = solve(inst, ShootConfig(h=h, u_crit=u_crit), NewtonConfig())
    return inst, mesh, profile


@pytest.fixture(scope="session")
def solved():
    """``solved(name, value, h=1e-4, u_crit=1.0) -> (instance, mesh, profile)``,
    cached for the whole session."""

    def get(name, value, h=1e-4, u_crit=1.0):
        return _solved(name, float(value), float(h), float(u_crit))

    return get


# ---------------------------------------------------------------------------
# acceptance report: one PASS/FAIL line per criterion in the terminal summary

_ACCEPTANCE = {}


@pytest.fixture
def record_criterion():
    def rec(number, ok, detail):
        _ACCEPTANCE[number] = (bool(ok), detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return rec


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
