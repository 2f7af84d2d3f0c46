"""Exact complex rationals.

Python ships exact rationals (:class:`fractions.Fraction`) and inexact
complex numbers, but nothing that is both.  The polynomial algebra needs
exact complex coefficients for identity checks (Jacobi, homological
equation, reality), so this is a thin pair-of-Fractions type.  Floats are
converted exactly via ``Fraction(float)``.
"""
from __future__ import annotations

from fractions import Fraction
from numbers import Rational


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    return Fraction(x)


class QComplex:
    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = _frac(re)
        self.im = _frac(im)

    @classmethod
    def coerce(cls, x) -> "QComplex":
        if isinstance(x, QComplex):
            return x
        if isinstance(x, complex):
            return cls(Fraction(x.real), Fraction(x.imag))
        if isinstance(x, (int, float, Rational)):
            return cls(x, 0)
        # numpy scalars
        if hasattr(x, "imag"):
            return cls(Fraction(float(x.real)), Fraction(float(x.imag)))
        raise TypeError(f"cannot convert {type(x).__name__} to QComplex")

    def __add__(self, other):
        try:
            o = QComplex.coerce(other)
        except TypeError:
            return NotImplemented
        return QComplex(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return QComplex(-self.re, -self.im)

    def __sub__(self, other):
        try:
            o = QComplex.coerce(other)
        except TypeError:
            return NotImplemented
        return QComplex(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        return QComplex.coerce(other) - self

    def __mul__(self, other):
        try:
            o = QComplex.coerce(other)
        except TypeError:
            return NotImplemented
        return QComplex(self.re * o.re - self.im * o.im,
                        self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        try:
            o = QComplex.coerce(other)
        except TypeError:
            return NotImplemented
        den = o.re * o.re + o.im * o.im
        if den == 0:
            raise ZeroDivisionError("QComplex division by zero")
        return QComplex((self.re * o.re + self.im * o.im) / den,
                        (self.im * o.re - self.re * o.im) / den)

    def __rtruediv__(self, other):
        return QComplex.coerce(other) / self

    def conjugate(self):
        return QComplex(self.re, -self.im)

    def __abs__(self):
        return abs(complex(self))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, other):
        try:
            o = QComplex.coerce(other)
        except TypeError:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    @property
    def real(self):
        return self.re

    @property
    def imag(self):
        return self.im

    def __repr__(self):
        return f"QComplex({self.re}, {self.im})"


def exact(x) -> QComplex:
    """Exact complex-rational copy of a number (floats are taken bit-exactly)."""
    return QComplex.coerce(x)
