"""Exact descriptions of real inputs that can be refined to any precision.

Three kinds are supported:

* :class:`RationalReal` - an exact ``Fraction``;
* :class:`AlgebraicReal` - the unique root of an integer polynomial inside an
  isolating rational interval (``sqrtD`` is the special case x^2 - D);
* :class:`ComputedReal` - a value defined by a function ``bits -> mpfr``
  (used for derived quantities such as 1/log b).

Every kind provides ``at(bits)``; the first two also provide
``floor_scaled(bits)``, a rigorous ``floor(x * 2**bits)`` used by digit
extraction.
"""

from __future__ import annotations

import math
import re
import threading
from fractions import Fraction
from typing import Callable, Sequence

import gmpy2
from gmpy2 import mpfr, mpz

from .errors import NotIsolating, ParseError
from .hp import HPReal, to_mpfr, workprec


class ExactReal:
    rational: Fraction | None = None

    def at(self, bits: int) -> HPReal:
        raise NotImplementedError

    def floor_scaled(self, bits: int) -> tuple[int, bool]:
        """Return ``(n, exact)`` with n = floor(x * 2**bits); ``exact`` if x*2**bits == n."""
        raise NotImplementedError

    @property
    def is_integer(self) -> bool:
        return self.rational is not None and self.rational.denominator == 1

    def __float__(self) -> float:
        return float(self.at(64))


class RationalReal(ExactReal):
    def __init__(self, value):
        self.rational = Fraction(value)

    def at(self, bits: int) -> HPReal:
        return to_mpfr(self.rational, bits)

    def floor_scaled(self, bits: int) -> tuple[int, bool]:
        q = self.rational * (Fraction(2) ** bits)
        n = math.floor(q)
        return n, q == n

    def __repr__(self) -> str:
        return f"RationalReal({self.rational})"

    def __str__(self) -> str:
        return str(self.rational)


def _poly_sign_scaled(coeffs: Sequence[int], n: int, bits: int) -> int:
    """Sign of P(n / 2**bits), evaluated exactly in integers."""
    deg = len(coeffs) - 1
    acc = 0
    for i in range(deg, -1, -1):
        acc = acc * n + (coeffs[i] << (bits * (deg - i)))
    return (acc > 0) - (acc < 0)


def _poly_eval(coeffs: Sequence[int], x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _poly_rem(a: list[Fraction], b: list[Fraction]) -> list[Fraction]:
    a = list(a)
    while len(a) >= len(b) and any(a):
        if a[-1] == 0:
            a.pop()
            continue
        factor = a[-1] / b[-1]
        shift = len(a) - len(b)
        for i, c in enumerate(b):
            a[i + shift] -= factor * c
        a.pop()
    while a and a[-1] == 0:
        a.pop()
    return a


def sturm_root_count(coeffs: Sequence[int], lo: Fraction, hi: Fraction) -> int:
    """Number of distinct real roots of P in (lo, hi]."""
    p0 = [Fraction(c) for c in coeffs]
    while p0 and p0[-1] == 0:
        p0.pop()
    p1 = [Fraction(i * c) for i, c in enumerate(p0)][1:]
    seq = [p0, p1]
    while len(seq[-1]) > 1:
        r = _poly_rem(seq[-2], seq[-1])
        if not r:
            break
        seq.append([-c for c in r])

    def changes(x: Fraction) -> int:
        signs = []
        for p in seq:
            v = _poly_eval(p, x)
            if v != 0:
                signs.append(v > 0)
        return sum(1 for a, b in zip(signs, signs[1:]) if a != b)

    return changes(lo) - changes(hi)


class AlgebraicReal(ExactReal):
    """Root of ``sum(coeffs[i] * x**i)`` isolated in the open interval (lo, hi)."""

    def __init__(self, coeffs: Sequence[int], lo, hi, label: str | None = None):
        coeffs = [int(c) for c in coeffs]
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs.pop()
        if len(coeffs) < 2:
            raise NotIsolating("polynomial must have degree >= 1")
        lo, hi = Fraction(lo), Fraction(hi)
        if not lo < hi:
            raise NotIsolating("empty isolating interval")
        s_lo = _poly_sign_scaled_frac(coeffs, lo)
        s_hi = _poly_sign_scaled_frac(coeffs, hi)
        if s_lo == 0 or s_hi == 0:
            raise NotIsolating("interval endpoint is a root")
        count = sturm_root_count(coeffs, lo, hi)
        if count != 1 or s_lo == s_hi:
            raise NotIsolating(f"interval ({lo}, {hi}) brackets {count} roots")
        self.coeffs = coeffs
        self.lo, self.hi = lo, hi
        self._sign_lo = s_lo
        self.label = label or f"root:{','.join(map(str, coeffs))}:{lo},{hi}"
        self._square = len(coeffs) == 3 and coeffs[1] == 0 and coeffs[2] == 1 and coeffs[0] < 0 and lo >= 0
        self._cache: dict[int, tuple[int, bool]] = {}
        self._lock = threading.Lock()

    def floor_scaled(self, bits: int) -> tuple[int, bool]:
        with self._lock:
            hit = self._cache.get(bits)
        if hit is not None:
            return hit
        if self._square:
            d = -self.coeffs[0]
            n = gmpy2.isqrt(mpz(d) << (2 * bits))
            out = (int(n), int(n) * int(n) == d << (2 * bits))
        else:
            out = self._refine(bits)
        with self._lock:
            self._cache[bits] = out
        return out

    def _side(self, n: int, bits: int) -> int:
        """-1 if n/2^bits < root, 0 if equal, +1 if greater."""
        s = _poly_sign_scaled(self.coeffs, n, bits)
        if s == 0:
            return 0
        return -1 if s == self._sign_lo else 1

    def _refine(self, bits: int) -> tuple[int, bool]:
        guess = self._newton(bits + 16)
        n = int(gmpy2.floor(gmpy2.mul_2exp(guess, bits)))
        lo_n = math.floor(self.lo * 2**bits)
        hi_n = math.ceil(self.hi * 2**bits)
        for step in (0, 1, -1, 2, -2):
            c = n + step
            if self._side(c, bits) <= 0 and self._side(c + 1, bits) > 0:
                return c, self._side(c, bits) == 0
        # Newton failed to land; plain bisection over the scaled interval.
        a, b = lo_n, hi_n
        while b - a > 1:
            mid = (a + b) // 2
            if self._side(mid, bits) <= 0:
                a = mid
            else:
                b = mid
        return a, self._side(a, bits) == 0

    def _newton(self, bits: int) -> HPReal:
        lo, hi = self.lo, self.hi
        for _ in range(64):
            mid = (lo + hi) / 2
            v = _poly_sign_scaled_frac(self.coeffs, mid)
            if v == 0:
                return to_mpfr(mid, bits)
            if v == self._sign_lo:
                lo = mid
            else:
                hi = mid
        prec = 64
        x = to_mpfr((lo + hi) / 2, prec)
        dcoeffs = [i * c for i, c in enumerate(self.coeffs)][1:]
        while True:
            prec = min(2 * prec, bits + 8)
            with workprec(prec):
                x = mpfr(x)
                p = mpfr(0)
                for c in reversed(self.coeffs):
                    p = p * x + c
                dp = mpfr(0)
                for c in reversed(dcoeffs):
                    dp = dp * x + c
                if dp != 0:
                    x = x - p / dp
            if prec >= bits + 8:
                return x

    def at(self, bits: int) -> HPReal:
        scale = bits + 4 + max(0, -_floor_log2(min_abs(self.lo, self.hi)))
        n, _ = self.floor_scaled(scale)
        with workprec(bits):
            return gmpy2.mul_2exp(mpfr(n), -scale)

    def __repr__(self) -> str:
        return f"AlgebraicReal({self.label})"

    def __str__(self) -> str:
        return self.label


def min_abs(lo: Fraction, hi: Fraction) -> Fraction:
    if lo < 0 < hi:
        return Fraction(0)
    return min(abs(lo), abs(hi))


def _floor_log2(x: Fraction) -> int:
    if x == 0:
        return 0
    return x.numerator.bit_length() - x.denominator.bit_length() - 1


def _poly_sign_scaled_frac(coeffs: Sequence[int], x: Fraction) -> int:
    v = _poly_eval(coeffs, x)
    return (v > 0) - (v < 0)


class ComputedReal(ExactReal):
    """A real known only through an approximation routine ``bits -> mpfr``."""

    def __init__(self, fn: Callable[[int], HPReal], label: str):
        self._fn = fn
        self.label = label
        self._cache: dict[int, HPReal] = {}
        self._lock = threading.Lock()

    def at(self, bits: int) -> HPReal:
        with self._lock:
            hit = self._cache.get(bits)
        if hit is None:
            hit = self._fn(bits)
            with self._lock:
                self._cache[bits] = hit
        return hit

    def floor_scaled(self, bits: int) -> tuple[int, bool]:
        raise NotImplementedError(f"{self.label} has no rigorous enclosure")

    def __repr__(self) -> str:
        return f"ComputedReal({self.label})"

    def __str__(self) -> str:
        return self.label


def as_exact(x) -> ExactReal:
    if isinstance(x, ExactReal):
        return x
    if isinstance(x, str):
        return parse_alpha(x)
    if isinstance(x, (int, Fraction)):
        return RationalReal(x)
    raise TypeError(f"cannot treat {x!r} as an exact real")


_INT = re.compile(r"[+-]?\d+\Z")
_RATIO = re.compile(r"([+-]?\d+)/(\d+)\Z")
_DECIMAL = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?\Z")
_SQRT = re.compile(r"sqrt(\d+)\Z")


def _parse_rational(text: str, full: str, offset: int) -> Fraction:
    t = text.strip()
    m = _RATIO.match(t)
    if m:
        if int(m.group(2)) == 0:
            raise ParseError("zero denominator", full, offset + t.index("/") + 1)
        return Fraction(int(m.group(1)), int(m.group(2)))
    if _INT.match(t) or _DECIMAL.match(t):
        return Fraction(t)
    raise ParseError("expected an integer, p/q or decimal", full, offset)


def parse_alpha(text: str) -> ExactReal:
    """Parse ``N``, ``p/q``, ``sqrtD``, ``root:c0,...,ck:lo,hi`` or a decimal literal."""
    src = text
    text = text.strip().replace("−", "-")
    if not text:
        raise ParseError("empty value", src, 0)
    m = _SQRT.match(text)
    if m:
        d = int(m.group(1))
        r = math.isqrt(d)
        if d <= 0 or r * r == d:
            raise ParseError("sqrtD needs a positive non-square D", src, 4)
        return AlgebraicReal([-d, 0, 1], r, r + 1, label=f"sqrt{d}")
    if text.startswith("root:"):
        parts = text.split(":")
        if len(parts) != 3:
            raise ParseError("expected root:c0,...,ck:lo,hi", src, len("root:"))
        coeff_text, interval = parts[1], parts[2]
        coeffs = []
        pos = len("root:")
        for tok in coeff_text.split(","):
            if not _INT.match(tok.strip()):
                raise ParseError("polynomial coefficients must be integers", src, pos)
            coeffs.append(int(tok))
            pos += len(tok) + 1
        bounds = interval.split(",")
        if len(bounds) != 2:
            raise ParseError("interval must be lo,hi", src, pos)
        lo = _parse_rational(bounds[0], src, pos)
        hi = _parse_rational(bounds[1], src, pos + len(bounds[0]) + 1)
        return AlgebraicReal(coeffs, lo, hi, label=text)
    return RationalReal(_parse_rational(text, src, 0))
