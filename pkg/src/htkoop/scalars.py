"""Exact scalars: rationals and the quadratic field Q(sqrt(n)).

Rationals are :class:`fractions.Fraction`. :class:`QSqrtN` holds ``c + d*sqrt(n)``
with rational ``c`` and ``d``; every Koopman matrix entry and inner product on the
interval side lives here, since square roots of slopes ``n**e`` are ``n**(e/2)``.
"""
from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Union

Rational = Fraction
Scalar = Union["QSqrtN", Fraction, int]

__all__ = [
    "Rational",
    "QSqrtN",
    "parse_rational",
    "format_rational",
    "is_nadic",
    "nadic_level",
    "sqrt_fraction_float",
]


def parse_rational(text: str) -> Fraction:
    """Parse ``"p/q"`` or ``"p"`` (whitespace tolerated)."""
    text = text.strip()
    if not re.fullmatch(r"[+-]?\d+(/\d+)?", text):
        raise ValueError(f"not a rational: {text!r}")
    return Fraction(text)


def format_rational(q: Fraction) -> str:
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def is_nadic(q: Fraction, n: int) -> bool:
    """True iff ``q`` lies in Z[1/n], i.e. its denominator divides a power of n."""
    den = Fraction(q).denominator
    while den > 1:
        g = math.gcd(den, n)
        if g == 1:
            return False
        den //= g
    return True


def nadic_level(q: Fraction, n: int) -> int:
    """Smallest k >= 0 with ``q * n**k`` an integer. Raises if q is not n-adic."""
    q = Fraction(q)
    if not is_nadic(q, n):
        raise ValueError(f"{q} is not in Z[1/{n}]")
    k, num, den = 0, q.numerator, q.denominator
    while num % den:
        num *= n
        k += 1
    return k


def _isqrt_exact(n: int) -> int | None:
    s = math.isqrt(n)
    return s if s * s == n else None


def _floor_sqrt_scaled(q: Fraction, bits: int) -> int:
    """floor(sqrt(q) * 2**bits) for q >= 0."""
    return math.isqrt((q.numerator << (2 * bits)) // q.denominator)


def sqrt_fraction_float(q: Fraction) -> float:
    """Correctly rounded float of sqrt(q) for rational q >= 0."""
    q = Fraction(q)
    if q < 0:
        raise ValueError("negative argument")
    if q == 0:
        return 0.0
    rn, rd = _isqrt_exact(q.numerator), _isqrt_exact(q.denominator)
    if rn is not None and rd is not None:
        return float(Fraction(rn, rd))
    bits = 80 + max(q.denominator.bit_length() - q.numerator.bit_length(), 0)
    while True:
        lo = _floor_sqrt_scaled(q, bits)
        lo_f, hi_f = float(Fraction(lo, 1 << bits)), float(Fraction(lo + 1, 1 << bits))
        if lo_f == hi_f:
            return lo_f
        bits += 64


class QSqrtN:
    """An element ``c + d*sqrt(base)`` of Q(sqrt(base)).

    If ``base`` is a perfect square the radical part is folded into ``c``.
    Arithmetic with plain ints/Fractions is allowed; mixing two bases raises.
    """

    __slots__ = ("base", "c", "d")

    def __init__(self, base: int, c: Fraction | int = 0, d: Fraction | int = 0):
        if not isinstance(base, int) or base < 2:
            raise ValueError(f"base must be an integer >= 2, got {base!r}")
        c, d = Fraction(c), Fraction(d)
        root = _isqrt_exact(base)
        if root is not None and d:
            c, d = c + d * root, Fraction(0)
        self.base = base
        self.c = c
        self.d = d

    # construction helpers -------------------------------------------------

    @classmethod
    def power_half(cls, base: int, e: int) -> "QSqrtN":
        """``base ** (e/2)`` exactly."""
        if e % 2 == 0:
            return cls(base, Fraction(base) ** (e // 2))
        return cls(base, 0, Fraction(base) ** ((e - 1) // 2))

    @classmethod
    def parse(cls, text: str) -> "QSqrtN":
        """Inverse of :meth:`__str__`: ``"c + d*sqrt(n)"`` or ``"c - d*sqrt(n)"``."""
        m = re.fullmatch(
            r"\s*([+-]?\d+(?:/\d+)?)\s*([+-])\s*(\d+(?:/\d+)?)\*sqrt\((\d+)\)\s*", text
        )
        if not m:
            raise ValueError(f"not a Q(sqrt n) literal: {text!r}")
        c, sign, d, base = m.groups()
        dd = Fraction(d) if sign == "+" else -Fraction(d)
        return cls(int(base), Fraction(c), dd)

    # coercion -------------------------------------------------------------

    def _coerce(self, other) -> "QSqrtN":
        if isinstance(other, QSqrtN):
            if other.base != self.base:
                raise ValueError(f"base mismatch: {self.base} vs {other.base}")
            return other
        if isinstance(other, (int, Fraction)):
            return QSqrtN(self.base, other)
        return NotImplemented

    # arithmetic -----------------------------------------------------------

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return QSqrtN(self.base, self.c + o.c, self.d + o.d)

    __radd__ = __add__

    def __neg__(self):
        return QSqrtN(self.base, -self.c, -self.d)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return QSqrtN(self.base, self.c - o.c, self.d - o.d)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return QSqrtN(
            self.base,
            self.c * o.c + self.base * self.d * o.d,
            self.c * o.d + self.d * o.c,
        )

    __rmul__ = __mul__

    def norm(self) -> Fraction:
        """Field norm ``c**2 - n*d**2``."""
        return self.c * self.c - self.base * self.d * self.d

    def inverse(self) -> "QSqrtN":
        if not self:
            raise ZeroDivisionError("inverse of zero in Q(sqrt n)")
        nm = self.norm()
        return QSqrtN(self.base, self.c / nm, -self.d / nm)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self * o.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __abs__(self):
        return -self if self.sign() < 0 else self

    # order ----------------------------------------------------------------

    def sign(self) -> int:
        """Exact sign of ``c + d*sqrt(n)``."""
        sc = (self.c > 0) - (self.c < 0)
        sd = (self.d > 0) - (self.d < 0)
        if sd == 0:
            return sc
        if sc == 0 or sc == sd:
            return sd
        # opposite signs: compare c**2 with n*d**2
        diff = self.c * self.c - self.base * self.d * self.d
        if diff == 0:
            return 0  # only reachable for perfect-square bases, which are folded
        return sc if diff > 0 else sd

    def cmp_rational(self, q: Fraction | int) -> int:
        """-1, 0, +1 as self is less than, equal to, greater than ``q``."""
        return (self - Fraction(q)).sign()

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.d == 0 and self.c == other
        if isinstance(other, QSqrtN):
            if self.d == 0 and other.d == 0:
                return self.c == other.c
            return self.base == other.base and self.c == other.c and self.d == other.d
        return NotImplemented

    def __hash__(self):
        if self.d == 0:
            return hash(self.c)
        return hash((self.base, self.c, self.d))

    def _cmp(self, other) -> int:
        o = self._coerce(other)
        if o is NotImplemented:
            raise TypeError(f"cannot compare QSqrtN with {type(other).__name__}")
        return (self - o).sign()

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __bool__(self):
        return bool(self.c) or bool(self.d)

    # conversion -----------------------------------------------------------

    def to_float(self) -> float:
        """Correctly rounded binary64 value (bracketing with exact integer square roots)."""
        if self.d == 0:
            return float(self.c)
        d_abs = abs(self.d)
        bits = 96
        while True:
            # sqrt(n) in [s/2**bits, (s+1)/2**bits]
            s = math.isqrt(self.base << (2 * bits))
            lo_r = Fraction(s, 1 << bits)
            hi_r = Fraction(s + 1, 1 << bits)
            if self.d > 0:
                lo, hi = self.c + d_abs * lo_r, self.c + d_abs * hi_r
            else:
                lo, hi = self.c - d_abs * hi_r, self.c - d_abs * lo_r
            flo, fhi = float(lo), float(hi)
            if flo == fhi:
                return flo
            bits *= 2

    __float__ = to_float

    def __str__(self):
        sign = "-" if self.d < 0 else "+"
        return f"{format_rational(self.c)} {sign} {format_rational(abs(self.d))}*sqrt({self.base})"

    def __repr__(self):
        return f"QSqrtN({self.base}, {self.c!s}, {self.d!s})"
