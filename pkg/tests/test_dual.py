import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sibvp.dual import Dual, seed, tangent_of, value_of


def test_product_rule():
    x, y = seed([2.0, 3.0], 2)
    z = x * y + x / y
    assert value_of(z) == pytest.approx(6.0 + 2.0 / 3.0)
    assert tangent_of(z, 2) == pytest.approx([3.0 + 1.0 / 3.0, 2.0 - 2.0 / 9.0])


def test_constants_have_zero_tangent():
    assert np.all(tangent_of(np.ones(3), 2) == 0)
    assert Dual.constant([1.0, 2.0], 3).der.shape == (2, 3)


def test_where_selects_value_and_tangent():
    (x,) = seed([np.array([-1.0, 2.0])], 1)
    y = np.where(x.val > 0, x * x, -x)
    assert list(y.val) == [1.0, 4.0]
    assert list(y.der[:, 0]) == [-1.0, 4.0]


@settings(max_examples=100, deadline=None)
@given(st.floats(-3, 3), st.floats(0.1, 3))
def test_ufuncs_match_central_differences(a, b):
    def f(x, y):
        return np.sinh(x) * np.exp(-y) + np.sqrt(y) * np.cosh(x) - x ** 3 / (1 + y)

    x, y = seed([a, b], 2)
    z = f(x, y)
    eps = 1e-6
    fx = (f(a + eps, b) - f(a - eps, b)) / (2 * eps)
    fy = (f(a, b + eps) - f(a, b - eps)) / (2 * eps)
    np.testing.assert_allclose(tangent_of(z, 2), [fx, fy], rtol=1e-6, atol=1e-7)
