"""Precision-tracked real/complex arithmetic on top of MPFR/MPC (via gmpy2).

Reals are ``gmpy2.mpfr`` values and complex numbers are ``gmpy2.mpc``; both
carry their own precision, so no wrapper types are needed.  Exact rationals
(``fractions.Fraction``) are accepted wherever a real is expected and are kept
exact as long as possible.

The elementary functions (exp, log, sin, cos, sqrt) come from MPFR, which
rounds correctly (<= 1/2 ulp), comfortably inside the 2 ulp contract.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Union

import gmpy2
from gmpy2 import mpc, mpfr, mpz

from .errors import PrecisionExhausted, ValidationError

HPReal = type(mpfr(0))
HPComplex = type(mpc(0))
RealLike = Union[int, Fraction, HPReal]


@dataclass(frozen=True)
class PrecisionContext:
    """Accuracy target and error budget for a computation.

    ``target_bits`` is the accuracy promised for final answers, ``guard_bits``
    the extra working precision, ``max_working_bits`` a hard ceiling.
    """

    target_bits: int = 128
    guard_bits: int = 32
    max_working_bits: int = 1 << 16

    def __post_init__(self):
        if self.target_bits < 16 or self.guard_bits < 16:
            raise ValidationError("target_bits and guard_bits must be >= 16")
        if self.max_working_bits < self.target_bits + self.guard_bits:
            raise ValidationError("max_working_bits < target_bits + guard_bits")

    def working_bits(self, extra: int = 0, ops: int = 1) -> int:
        """target + guard + ceil(log2(ops)) + extra, checked against the cap."""
        bits = self.target_bits + self.guard_bits + max(0, math.ceil(math.log2(max(ops, 1)))) + extra
        return self.check(bits)

    def check(self, bits: int) -> int:
        if bits > self.max_working_bits:
            raise PrecisionExhausted(
                f"needs {bits} working bits, cap is {self.max_working_bits}"
            )
        return bits

    def budget(self, shift: int = 0) -> HPReal:
        """2^(-target_bits + shift) as an exact mpfr."""
        return gmpy2.mul_2exp(mpfr(1), -self.target_bits + shift)

    def with_target(self, target_bits: int) -> "PrecisionContext":
        return PrecisionContext(
            target_bits, self.guard_bits, max(self.max_working_bits, target_bits + self.guard_bits)
        )


DEFAULT_CONTEXT = PrecisionContext()


def workprec(bits: int):
    """Context manager setting the MPFR/MPC working precision."""
    return gmpy2.context(precision=int(bits))


def to_mpfr(x, bits: int) -> HPReal:
    """Round ``x`` (int, Fraction, decimal string, float, mpfr) to ``bits``."""
    with workprec(bits):
        if isinstance(x, Fraction) or (isinstance(x, Rational) and not isinstance(x, int)):
            return mpfr(mpz(x.numerator)) / mpfr(mpz(x.denominator))
        if isinstance(x, str):
            return mpfr(Fraction(x).numerator) / mpfr(Fraction(x).denominator)
        return mpfr(x)


def is_exact_rational(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


def frac(x: RealLike):
    """Fractional part {x} = x - floor(x), in [0, 1).

    Exact for ints and Fractions (returned as Fraction), and exact for mpfr
    inputs: the subtraction only drops bits already present in ``x``.
    """
    if is_exact_rational(x):
        x = Fraction(x)
        return x - math.floor(x)
    if not gmpy2.is_finite(x):
        raise ValidationError("frac of a non-finite value")
    # For x < 0 the result 1 - {|x|} spans from 2^-1 down to the last bit of
    # x, so small |x| needs extra bits to stay exact.
    extra = max(0, -gmpy2.get_exp(x)) if x < 0 else 0
    with workprec(x.precision + extra + 2):
        return x - gmpy2.floor(x)


def dist_nearest_int(x: RealLike):
    """Distance ||x|| from x to the nearest integer, in [0, 1/2]."""
    f = frac(x)
    if isinstance(f, Fraction):
        return min(f, 1 - f)
    if 2 * f <= 1:
        return f
    with workprec(f.precision + 2):
        return 1 - f  # exact: f >= 1/2 carries every bit of 1 - f


def reduce_unit(x: RealLike):
    """x minus its nearest integer (ties to even); exact."""
    if is_exact_rational(x):
        x = Fraction(x)
        return x - round(x)
    with workprec(x.precision + 1):
        return x - gmpy2.rint(x)


_QUARTER_TURNS = {0: (1, 0), 1: (0, 1), 2: (-1, 0), -1: (0, -1), -2: (-1, 0)}


def e_unit(x: RealLike, bits: int | None = None) -> HPComplex:
    """e(x) = exp(2 pi i x), with x reduced mod 1 before the angle is formed."""
    r = reduce_unit(x)
    if bits is None:
        bits = r.precision if isinstance(r, HPReal) else gmpy2.get_context().precision
    four_r = 4 * r
    if (isinstance(four_r, Fraction) and four_r.denominator == 1) or (
        isinstance(four_r, HPReal) and gmpy2.is_integer(four_r)
    ):
        c, s = _QUARTER_TURNS[int(four_r)]
        with workprec(bits):
            return mpc(c, s)
    with workprec(bits + 4):
        angle = 2 * gmpy2.const_pi() * (to_mpfr(r, bits + 4) if isinstance(r, Fraction) else r)
        s, c = gmpy2.sin_cos(angle)
    with workprec(bits):
        return mpc(c, s)


def conj(z: HPComplex) -> HPComplex:
    """Exact complex conjugate (mpc.conjugate rounds to the context precision)."""
    with workprec(max(z.real.precision, z.imag.precision)):
        return mpc(z.real, -z.imag)


def pi(bits: int) -> HPReal:
    with workprec(bits):
        return gmpy2.const_pi()


def mpfr_to_hex(x: HPReal) -> str:
    """Exact serialization: signed hex significand, 'p', binary exponent."""
    if x == 0:
        return "0x0p0"
    man, exp = x.as_mantissa_exp()
    sign = "-" if man < 0 else ""
    return f"{sign}0x{abs(int(man)):x}p{int(exp)}"


def mpfr_from_hex(text: str, bits: int) -> HPReal:
    body, exp = text.split("p")
    man = int(body, 16)
    with workprec(bits):
        return gmpy2.mul_2exp(mpfr(man), int(exp))


def decimal_digits(bits: int) -> int:
    """Digits that ``bits`` of precision justify: floor(bits * log10 2)."""
    return int(bits * math.log10(2))


def format_decimal(x, digits: int) -> str:
    """Deterministic scientific-notation string with ``digits`` significant digits."""
    if isinstance(x, Fraction) or isinstance(x, int):
        x = to_mpfr(x, int(digits * 3.33) + 16)
    if isinstance(x, HPComplex):
        raise TypeError("format_decimal takes a real value")
    if x == 0:
        return "0"
    if not gmpy2.is_finite(x):
        return str(x)
    mant, exp, _ = x.digits(10, digits)
    sign = ""
    if mant.startswith("-"):
        sign, mant = "-", mant[1:]
    mant = mant.rstrip("0") or "0"
    head, tail = mant[0], mant[1:]
    e = exp - 1
    return f"{sign}{head}{'.' + tail if tail else ''}e{e:+d}"
