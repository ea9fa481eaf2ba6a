"""Exact arithmetic on Gaussian integers and their ratios.

Fade states of lattice constellations are ratios of two Gaussian integers, so
they are stored as :class:`GaussianRational` values in a canonical form where
structural equality coincides with equality of the complex values.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering
from typing import Union

__all__ = [
    "GaussianInt",
    "GaussianRational",
    "UNITS",
    "gcd",
    "is_coprime",
    "euler_phi",
    "canonical",
]

IntLike = Union[int, "GaussianInt"]


@total_ordering
@dataclass(frozen=True, slots=True)
class GaussianInt:
    a: int
    b: int = 0

    @classmethod
    def of(cls, x: IntLike | complex) -> GaussianInt:
        if isinstance(x, GaussianInt):
            return x
        if isinstance(x, int):
            return cls(x, 0)
        if isinstance(x, complex):
            a, b = round(x.real), round(x.imag)
            if a != x.real or b != x.imag:
                raise ValueError(f"{x!r} is not a Gaussian integer")
            return cls(int(a), int(b))
        raise TypeError(f"cannot convert {type(x).__name__} to GaussianInt")

    def norm(self) -> int:
        return self.a * self.a + self.b * self.b

    def conj(self) -> GaussianInt:
        return GaussianInt(self.a, -self.b)

    def is_zero(self) -> bool:
        return self.a == 0 and self.b == 0

    def is_unit(self) -> bool:
        return self.norm() == 1

    def __complex__(self) -> complex:
        return complex(self.a, self.b)

    def __neg__(self) -> GaussianInt:
        return GaussianInt(-self.a, -self.b)

    def __add__(self, other: IntLike) -> GaussianInt:
        o = GaussianInt.of(other)
        return GaussianInt(self.a + o.a, self.b + o.b)

    __radd__ = __add__

    def __sub__(self, other: IntLike) -> GaussianInt:
        o = GaussianInt.of(other)
        return GaussianInt(self.a - o.a, self.b - o.b)

    def __rsub__(self, other: IntLike) -> GaussianInt:
        return GaussianInt.of(other) - self

    def __mul__(self, other: IntLike) -> GaussianInt:
        o = GaussianInt.of(other)
        return GaussianInt(self.a * o.a - self.b * o.b, self.a * o.b + self.b * o.a)

    __rmul__ = __mul__

    def __divmod__(self, other: IntLike) -> tuple[GaussianInt, GaussianInt]:
        """Division with the quotient rounded to the nearest lattice point.

        The remainder has norm at most half the divisor's norm, which is what
        makes the Euclidean algorithm terminate.
        """
        o = GaussianInt.of(other)
        n = o.norm()
        if n == 0:
            raise ZeroDivisionError("Gaussian division by zero")
        p = self * o.conj()
        q = GaussianInt(_round_div(p.a, n), _round_div(p.b, n))
        return q, self - q * o

    def __floordiv__(self, other: IntLike) -> GaussianInt:
        return divmod(self, other)[0]

    def __mod__(self, other: IntLike) -> GaussianInt:
        return divmod(self, other)[1]

    def divides(self, other: IntLike) -> bool:
        if self.is_zero():
            return GaussianInt.of(other).is_zero()
        return (GaussianInt.of(other) % self).is_zero()

    def exact_div(self, other: IntLike) -> GaussianInt:
        q, r = divmod(self, other)
        if not r.is_zero():
            raise ArithmeticError(f"{other} does not divide {self}")
        return q

    def normalized(self) -> GaussianInt:
        """Associate lying in the first quadrant (re > 0, im >= 0); 0 stays 0."""
        if self.is_zero():
            return self
        x = self
        while not (x.a > 0 and x.b >= 0):
            x = x * J
        return x

    def __lt__(self, other: GaussianInt) -> bool:
        return (self.norm(), self.a, self.b) < (other.norm(), other.a, other.b)

    def __str__(self) -> str:
        return f"{self.a}{self.b:+d}i"


def _round_div(p: int, n: int) -> int:
    # nearest integer to p/n for n > 0, halves rounded up
    return (2 * p + n) // (2 * n)


ONE = GaussianInt(1, 0)
J = GaussianInt(0, 1)
UNITS = (ONE, J, GaussianInt(-1, 0), GaussianInt(0, -1))


def gcd(alpha: IntLike, beta: IntLike) -> GaussianInt:
    """Greatest common divisor, normalized into the first quadrant."""
    x, y = GaussianInt.of(alpha), GaussianInt.of(beta)
    if x.is_zero() and y.is_zero():
        raise ValueError("gcd(0, 0) is undefined")
    while not y.is_zero():
        x, y = y, x % y
    return x.normalized()


def is_coprime(alpha: IntLike, beta: IntLike) -> bool:
    return gcd(alpha, beta).is_unit()


def euler_phi(n: int) -> int:
    """Euler's totient by trial-division factorization."""
    if n < 1:
        raise ValueError("euler_phi requires n >= 1")
    result, m, p = n, n, 2
    while p * p <= m:
        if m % p == 0:
            while m % p == 0:
                m //= p
            result -= result // p
        p += 1
    if m > 1:
        result -= result // m
    return result


_IMAG_RE = re.compile(r"^([+-]?\d*)[ij]$")
_GINT_RE = re.compile(r"^([+-]?\d+)(?:([+-]\d*)[ij])?$")


def _coefficient(text: str) -> int:
    return {"": 1, "+": 1, "-": -1}.get(text) or int(text)


def _parse_gint(text: str) -> GaussianInt:
    t = text.replace(" ", "")
    m = _IMAG_RE.match(t)
    if m is not None:
        return GaussianInt(0, _coefficient(m.group(1)))
    m = _GINT_RE.match(t)
    if m is None:
        raise ValueError(f"cannot parse Gaussian integer {text!r}")
    re_part, im_part = m.groups()
    return GaussianInt(int(re_part), 0 if im_part is None else _coefficient(im_part))


@dataclass(frozen=True, slots=True, init=False)
class GaussianRational:
    """Ratio ``num/den`` of Gaussian integers, always held in canonical form.

    Canonical form: ``gcd(num, den)`` is a unit and ``den`` lies in the
    first quadrant (re > 0, im >= 0).  Exactly one associate of a nonzero
    Gaussian integer satisfies that, so the form is unique.
    """

    num: GaussianInt
    den: GaussianInt

    def __init__(self, num: IntLike | complex, den: IntLike | complex = 1) -> None:
        n, d = GaussianInt.of(num), GaussianInt.of(den)
        if d.is_zero():
            raise ZeroDivisionError("zero denominator")
        if n.is_zero():
            n, d = n, ONE
        else:
            g = gcd(n, d)
            n, d = n.exact_div(g), d.exact_div(g)
            for u in UNITS:
                ud = d * u
                if ud.a > 0 and ud.b >= 0:
                    n, d = n * u, ud
                    break
        object.__setattr__(self, "num", n)
        object.__setattr__(self, "den", d)

    @classmethod
    def parse(cls, text: str) -> GaussianRational:
        """Read ``num`` or ``num/den`` where each side looks like ``3``,
        ``-2i``, ``1+1i`` or ``2-i`` (``j`` works in place of ``i``)."""
        parts = text.split("/")
        if len(parts) > 2:
            raise ValueError(f"cannot parse Gaussian rational {text!r}")
        num = _parse_gint(parts[0])
        den = _parse_gint(parts[1]) if len(parts) == 2 else ONE
        return cls(num, den)

    @property
    def real(self) -> Fraction:
        p = self.num * self.den.conj()
        return Fraction(p.a, self.den.norm())

    @property
    def imag(self) -> Fraction:
        p = self.num * self.den.conj()
        return Fraction(p.b, self.den.norm())

    def __complex__(self) -> complex:
        return complex(float(self.real), float(self.imag))

    def __abs__(self) -> float:
        return math.sqrt(self.num.norm() / self.den.norm())

    @property
    def angle(self) -> float:
        return math.atan2(float(self.imag), float(self.real))

    def abs2(self) -> Fraction:
        return Fraction(self.num.norm(), self.den.norm())

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def inverse(self) -> GaussianRational:
        if self.num.is_zero():
            raise ZeroDivisionError("inverse of zero")
        return GaussianRational(self.den, self.num)

    def conjugate(self) -> GaussianRational:
        return GaussianRational(self.num.conj(), self.den.conj())

    def __neg__(self) -> GaussianRational:
        return GaussianRational(-self.num, self.den)

    def __mul__(self, other: GaussianRational | IntLike) -> GaussianRational:
        if isinstance(other, GaussianRational):
            return GaussianRational(self.num * other.num, self.den * other.den)
        return GaussianRational(self.num * GaussianInt.of(other), self.den)

    __rmul__ = __mul__

    def __truediv__(self, other: GaussianRational | IntLike) -> GaussianRational:
        if not isinstance(other, GaussianRational):
            other = GaussianRational(other)
        return self * other.inverse()

    def sort_key(self) -> tuple[int, ...]:
        return (
            self.num.norm(),
            self.den.norm(),
            self.num.a,
            self.num.b,
            self.den.a,
            self.den.b,
        )

    def __str__(self) -> str:
        return f"{self.num}/{self.den}"

    def __repr__(self) -> str:
        return f"GaussianRational({self})"


def canonical(q: GaussianRational | tuple[IntLike, IntLike]) -> GaussianRational:
    """Canonical form of a ratio; idempotent on already-canonical values."""
    if isinstance(q, GaussianRational):
        return GaussianRational(q.num, q.den)
    num, den = q
    return GaussianRational(num, den)
