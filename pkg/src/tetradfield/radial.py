"""Radial functions with analytic derivatives.

A :class:`RadialFunction` knows its value and its derivative (another
RadialFunction).  Sums, products and scalings follow the usual rules, and
:class:`Dual` numbers propagate first derivatives through composite formulas
such as the gauge maps of the spherical module.
"""
from __future__ import annotations

import re
from typing import Callable

import numpy as np

from .errors import ConfigError

_NUM_STEP = 1e-4


class Dual:
    """First-order forward-mode number ``v + d * eps``."""

    __slots__ = ("v", "d")

    def __init__(self, v, d=0.0):
        self.v, self.d = v, d

    @staticmethod
    def lift(x):
        return x if isinstance(x, Dual) else Dual(x, 0.0)

    def __add__(self, o):
        o = Dual.lift(o)
        return Dual(self.v + o.v, self.d + o.d)

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.v, -self.d)

    def __sub__(self, o):
        return self + (-Dual.lift(o))

    def __rsub__(self, o):
        return Dual.lift(o) - self

    def __mul__(self, o):
        o = Dual.lift(o)
        return Dual(self.v * o.v, self.d * o.v + self.v * o.d)

    __rmul__ = __mul__

    def __truediv__(self, o):
        o = Dual.lift(o)
        return Dual(self.v / o.v, (self.d * o.v - self.v * o.d) / o.v ** 2)

    def __rtruediv__(self, o):
        return Dual.lift(o) / self

    def __pow__(self, k):
        return Dual(self.v ** k, k * self.v ** (k - 1) * self.d)

    def exp(self):
        e = np.exp(self.v)
        return Dual(e, e * self.d)


def dexp(x):
    return x.exp() if isinstance(x, Dual) else np.exp(x)


class RadialFunction:
    """Scalar function of ``r`` with a derivative.

    Parameters
    ----------
    fn : callable
        Vectorised value.
    deriv : RadialFunction or callable, optional
        Derivative; a 5-point central difference is used when omitted.
    label : str
    """

    def __init__(self, fn: Callable, deriv=None, label: str = "f"):
        self.fn = fn
        self._deriv = deriv
        self.label = label

    def __call__(self, r):
        return self.fn(np.asarray(r, dtype=float))

    def derivative(self) -> "RadialFunction":
        d = self._deriv
        if isinstance(d, RadialFunction):
            return d
        if callable(d):
            return RadialFunction(d, None, f"d({self.label})")
        fn = self.fn

        def num(r):
            r = np.asarray(r, dtype=float)
            h = _NUM_STEP * np.maximum(1.0, np.abs(r))
            return (fn(r - 2 * h) - 8 * fn(r - h) + 8 * fn(r + h) - fn(r + 2 * h)) / (12 * h)

        return RadialFunction(num, None, f"d({self.label})")

    def dual(self, x: Dual) -> Dual:
        """Value and derivative along a dual argument."""
        return Dual(self(x.v), self.derivative()(x.v) * x.d)

    # algebra
    def __add__(self, o):
        o = as_radial(o)
        return RadialFunction(lambda r: self(r) + o(r),
                              _lazy(lambda: self.derivative() + o.derivative()),
                              f"({self.label}+{o.label})")

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, o):
        return self + (-as_radial(o))

    def __rsub__(self, o):
        return as_radial(o) - self

    def __mul__(self, o):
        if np.isscalar(o):
            c = float(o)
            return RadialFunction(lambda r: c * self(r), _lazy(lambda: self.derivative() * c),
                                  f"{c:g}*{self.label}")
        o = as_radial(o)
        return RadialFunction(lambda r: self(r) * o(r),
                              _lazy(lambda: self.derivative() * o + self * o.derivative()),
                              f"{self.label}*{o.label}")

    __rmul__ = __mul__

    def __repr__(self):
        return f"RadialFunction({self.label})"


class _LazyDeriv(RadialFunction):
    """Derivative built on first use (avoids infinite recursion in the algebra)."""

    def __init__(self, make):
        self._make = make
        self._obj = None
        self.label = "d"

    def _get(self):
        if self._obj is None:
            self._obj = self._make()
        return self._obj

    def __call__(self, r):
        return self._get()(r)

    def derivative(self):
        return self._get().derivative()

    @property
    def fn(self):
        return self._get().fn


def _lazy(make):
    return _LazyDeriv(make)


def constant(c: float) -> RadialFunction:
    c = float(c)
    zero = RadialFunction(lambda r: np.zeros_like(np.asarray(r, dtype=float)), None, "0")
    zero._deriv = zero
    if c == 0:
        return zero
    return RadialFunction(lambda r: np.full_like(np.asarray(r, dtype=float), c), zero, f"{c:g}")


ZERO = constant(0.0)


def as_radial(x) -> RadialFunction:
    if isinstance(x, RadialFunction):
        return x
    if np.isscalar(x):
        return constant(x)
    raise TypeError(f"cannot convert {type(x).__name__} to a radial function")


def power(c: float, p: float) -> RadialFunction:
    """``c * r^p``."""
    c, p = float(c), float(p)
    if c == 0:
        return ZERO
    if p == 0:
        return constant(c)
    return RadialFunction(lambda r: c * np.asarray(r, dtype=float) ** p,
                          _lazy(lambda: power(c * p, p - 1)), f"{c:g}r^{p:g}")


def polynomial(coeffs) -> RadialFunction:
    """``sum_k coeffs[k] r^k``."""
    coeffs = [float(c) for c in coeffs]
    out = ZERO
    for k, c in enumerate(coeffs):
        if c:
            out = out + power(c, k)
    return out


def gaussian(amplitude: float, center: float, width: float) -> RadialFunction:
    """``a exp(-(r - r0)^2 / w^2)`` with analytic first two derivatives."""
    a, r0, w = float(amplitude), float(center), float(width)

    def g(r):
        return a * np.exp(-((np.asarray(r, dtype=float) - r0) / w) ** 2)

    d1 = RadialFunction(lambda r: -2 * (np.asarray(r) - r0) / w ** 2 * g(r),
                        RadialFunction(lambda r: (4 * (np.asarray(r) - r0) ** 2 / w ** 4 - 2 / w ** 2) * g(r)),
                        "gauss'")
    return RadialFunction(g, d1, f"gauss({a:g},{r0:g},{w:g})")


_TERM = re.compile(r"^([+-]?(?:\d+\.?\d*(?:e[+-]?\d+)?)?)\*?(r(?:\^([+-]?\d+\.?\d*))?)?$")


def parse_radial(text: str) -> RadialFunction:
    """Parse sums of monomials such as ``"2r"``, ``"r+0.1r^2"``, ``"0.5"``, ``"-0.2r^-1"``."""
    s = str(text).replace(" ", "").replace("**", "^")
    if not s:
        raise ConfigError("empty radial expression")
    terms = re.findall(r"[+-]?[^+-]+(?:e[+-]?\d+[^+-]*)?", s.replace("^-", "^~").replace("e-", "e~"))
    out = ZERO
    for t in terms:
        t = t.replace("~", "-")
        m = _TERM.match(t)
        if not m or (not m.group(1) and not m.group(2)):
            raise ConfigError(f"cannot parse radial term {t!r} in {text!r}")
        coef = m.group(1)
        c = 1.0 if coef in ("", "+") else -1.0 if coef == "-" else float(coef)
        p = 0.0 if not m.group(2) else float(m.group(3)) if m.group(3) else 1.0
        out = out + power(c, p)
    return out
