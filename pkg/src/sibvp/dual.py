"""Forward-mode algorithmic differentiation on numpy arrays.

A :class:`Dual` carries a value array ``val`` of shape ``S`` and a tangent
array ``der`` of shape ``S + (k,)`` holding ``k`` directional derivatives at
once.  Numpy ufuncs dispatch to the overloads below, so problem callbacks
written with ``np.sinh``, ``np.exp`` and friends differentiate without
modification.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Dual", "value_of", "tangent_of", "seed"]


def _v(x):
    return x.val if isinstance(x, Dual) else x


def _col(x):
    return np.asarray(x)[..., None]


class Dual:
    __slots__ = ("val", "der")
    __array_priority__ = 1000

    def __init__(self, val, der):
        self.val = val
        self.der = der

    # -- construction -------------------------------------------------------
    @classmethod
    def constant(cls, val, k):
        val = np.asarray(val, dtype=float)
        return cls(val, np.zeros(val.shape + (k,)))

    @property
    def nseeds(self):
        return self.der.shape[-1]

    def __repr__(self):
        return f"Dual({self.val!r}, {self.der!r})"

    def __getitem__(self, idx):
        return Dual(np.asarray(self.val)[idx], self.der[idx])

    def __len__(self):
        return len(self.val)

    @property
    def shape(self):
        return np.shape(self.val)

    # -- arithmetic ---------------------------------------------------------
    def __neg__(self):
        return Dual(-self.val, -self.der)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, self.der + other.der)
        return Dual(self.val + other, self.der + np.zeros_like(_col(other)))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val - other.val, self.der - other.der)
        return Dual(self.val - other, self.der + np.zeros_like(_col(other)))

    def __rsub__(self, other):
        return Dual(other - self.val, -self.der + np.zeros_like(_col(other)))

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(
                self.val * other.val,
                self.der * _col(other.val) + other.der * _col(self.val),
            )
        return Dual(self.val * other, self.der * _col(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            q = self.val / other.val
            return Dual(q, (self.der - other.der * _col(q)) / _col(other.val))
        return Dual(self.val / other, self.der / _col(other))

    def __rtruediv__(self, other):
        q = other / self.val
        return Dual(q, -self.der * _col(q / self.val))

    def __pow__(self, p):
        if isinstance(p, Dual):
            return np.exp(p * np.log(self))
        return Dual(self.val**p, self.der * _col(p * self.val ** (p - 1)))

    def __abs__(self):
        return Dual(np.abs(self.val), self.der * _col(np.sign(self.val)))

    # comparisons act on the value part only
    def __lt__(self, other):
        return self.val < _v(other)

    def __le__(self, other):
        return self.val <= _v(other)

    def __gt__(self, other):
        return self.val > _v(other)

    def __ge__(self, other):
        return self.val >= _v(other)

    # -- numpy protocol -----------------------------------------------------
    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        if method != "__call__" or kwargs.get("out") is not None:
            return NotImplemented
        rule = _UFUNCS.get(ufunc)
        if rule is None:
            return NotImplemented
        return rule(*inputs)

    def __array_function__(self, func, types, args, kwargs):
        if func is np.where:
            return _where(*args, **kwargs)
        if func is np.shape:
            return np.shape(self.val)
        return NotImplemented


def _unary(f, df):
    def rule(x):
        return Dual(f(x.val), x.der * _col(df(x.val)))

    return rule


def _binary(name, rname):
    def rule(a, b):
        if isinstance(a, Dual):
            return getattr(a, name)(b)
        return getattr(b, rname)(a)

    return rule


def _where(cond, a, b):
    cond = np.asarray(cond)
    k = next(x.nseeds for x in (a, b) if isinstance(x, Dual))
    a = a if isinstance(a, Dual) else Dual.constant(a, k)
    b = b if isinstance(b, Dual) else Dual.constant(b, k)
    return Dual(np.where(cond, a.val, b.val), np.where(cond[..., None], a.der, b.der))


def _sqrt_rule(x):
    r = np.sqrt(x.val)
    return Dual(r, x.der * _col(0.5 / r))


_UFUNCS = {
    np.add: _binary("__add__", "__radd__"),
    np.subtract: _binary("__sub__", "__rsub__"),
    np.multiply: _binary("__mul__", "__rmul__"),
    np.true_divide: _binary("__truediv__", "__rtruediv__"),
    np.power: lambda a, b: a.__pow__(b),
    np.negative: lambda x: -x,
    np.absolute: lambda x: abs(x),
    np.square: lambda x: x * x,
    np.sqrt: _sqrt_rule,
    np.exp: _unary(np.exp, np.exp),
    np.log: _unary(np.log, lambda v: 1.0 / v),
    np.sinh: _unary(np.sinh, np.cosh),
    np.cosh: _unary(np.cosh, np.sinh),
    np.tanh: _unary(np.tanh, lambda v: 1.0 - np.tanh(v) ** 2),
    np.sin: _unary(np.sin, np.cos),
    np.cos: _unary(np.cos, lambda v: -np.sin(v)),
    np.less: lambda a, b: _v(a) < _v(b),
    np.less_equal: lambda a, b: _v(a) <= _v(b),
    np.greater: lambda a, b: _v(a) > _v(b),
    np.greater_equal: lambda a, b: _v(a) >= _v(b),
    np.isfinite: lambda x: np.isfinite(x.val) & np.all(np.isfinite(x.der), axis=-1),
}


def value_of(x):
    """Value part of ``x`` (identity on plain numbers and arrays)."""
    return _v(x)


def tangent_of(x, k):
    """Tangent part of ``x`` with ``k`` seeds; zeros for constants."""
    if isinstance(x, Dual):
        return x.der
    return np.zeros(np.shape(x) + (k,))


def seed(values, k):
    """Promote ``values`` (a sequence of arrays) to duals, seeding entry ``i``
    in direction ``i`` of ``k``."""
    out = []
    for i, v in enumerate(values):
        v = np.asarray(v, dtype=float)
        der = np.zeros(v.shape + (k,))
        der[..., i] = 1.0
        out.append(Dual(v, der))
    return out
