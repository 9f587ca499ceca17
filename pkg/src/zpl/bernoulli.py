"""Bernoulli numbers and polynomials, periodic Bernoulli functions psi_k,
their truncated Fourier series, and the saw-tooth defect bound."""

from __future__ import annotations

import math
import threading
from fractions import Fraction
from math import comb
from typing import List

import gmpy2
from gmpy2 import mpc, mpfr, mpz

from .hp import (
    DEFAULT_CONTEXT,
    HPComplex,
    HPReal,
    PrecisionContext,
    dist_nearest_int,
    e_unit,
    frac,
    is_exact_rational,
    to_mpfr,
    workprec,
)

_lock = threading.Lock()
_numbers: List[Fraction] = [Fraction(1)]


def bernoulli_numbers(K: int) -> List[Fraction]:
    """B_0 ... B_K (with B_1 = -1/2) from sum_{j<=k} C(k+1, j) B_j = 0.

    Results are cached; the cache only ever grows, under a lock.
    """
    if K < 0:
        raise ValueError("K must be >= 0")
    with _lock:
        have = len(_numbers)
        for k in range(have, K + 1):
            if k >= 3 and k % 2 == 1:
                _numbers.append(Fraction(0))
                continue
            s = sum(comb(k + 1, j) * _numbers[j] for j in range(k))
            _numbers.append(-s / (k + 1))
        return _numbers[: K + 1]


def bernoulli_number(k: int) -> Fraction:
    return bernoulli_numbers(k)[k]


def bernoulli_poly_coeffs(k: int) -> List[Fraction]:
    """Coefficients of B_k(x) in ascending powers: B_k(x) = sum C(k,j) B_j x^(k-j)."""
    B = bernoulli_numbers(k)
    return [comb(k, k - i) * B[k - i] for i in range(k + 1)]


def bernoulli_poly_exact(k: int, x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(bernoulli_poly_coeffs(k)):
        acc = acc * x + c
    return acc


def bernoulli_poly(k: int, x, bits: int | None = None):
    """B_k(x) by Horner's rule; exact Fraction for rational x, else mpfr."""
    if is_exact_rational(x):
        return bernoulli_poly_exact(k, Fraction(x))
    if bits is None:
        bits = x.precision
    coeffs = bernoulli_poly_coeffs(k)
    # Horner over [0,1] loses at most ~k bits to cancellation.
    with workprec(bits + k + 8):
        acc = mpfr(0)
        for c in reversed(coeffs):
            acc = acc * x + mpfr(mpz(c.numerator)) / c.denominator
    with workprec(bits):
        return mpfr(acc)


def is_integer_at(x, ctx: PrecisionContext = DEFAULT_CONTEXT) -> bool:
    """Integer test used by psi_1: exact for rationals, else ||x|| < 2^(-target/2)."""
    if is_exact_rational(x):
        return Fraction(x).denominator == 1
    return dist_nearest_int(x) < gmpy2.mul_2exp(mpfr(1), -(ctx.target_bits // 2))


def periodic_bernoulli(k: int, x, ctx: PrecisionContext = DEFAULT_CONTEXT):
    """psi_k(x) = B_k({x}); psi_1 vanishes at integers."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 1 and is_integer_at(x, ctx):
        return Fraction(0) if is_exact_rational(x) else mpfr(0)
    f = frac(x)
    if isinstance(f, Fraction):
        return bernoulli_poly_exact(k, f)
    return bernoulli_poly(k, f, max(f.precision, ctx.target_bits + ctx.guard_bits))


def _fourier_pairs(k: int, theta, K: int, bits: int) -> HPReal:
    """sum_{n=1}^K 2*trig(2 pi theta n)/n^(k+1), sin for even k, cos for odd k."""
    use_sin = k % 2 == 0
    theta_exact = is_exact_rational(theta)
    with workprec(bits):
        total = mpfr(0)
    for n in range(1, K + 1):
        arg = Fraction(theta) * n if theta_exact else theta * n
        z = e_unit(arg, bits)
        part = z.imag if use_sin else z.real
        with workprec(bits):
            total += 2 * part / mpz(n) ** (k + 1)
    return total


def fourier_prefactor_sign(k: int) -> int:
    """Sign of i^-(k+1) times the paired sum's phase (i for even k, 1 for odd k)."""
    # For even k the paired sum is i * S; i^{-(k+1)} * i = i^{-k} = (-1)^{k/2}.
    # For odd k the paired sum is S; i^{-(k+1)} = (-1)^{(k+1)/2}.
    if k % 2 == 0:
        return 1 if (k // 2) % 2 == 0 else -1
    return 1 if ((k + 1) // 2) % 2 == 0 else -1


def fourier_partial(k: int, theta, K: int, ctx: PrecisionContext = DEFAULT_CONTEXT) -> HPComplex:
    """(k+1)!/(2 pi i)^(k+1) * sum_{1<=|n|<=K} e(theta n)/n^(k+1).

    The +-n terms are paired, so the result is real with an exactly zero
    imaginary part.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    bits = ctx.working_bits(ops=K) + k
    if isinstance(theta, HPReal):
        bits = max(bits, theta.precision)
    if not is_exact_rational(theta) and theta.precision < bits + K.bit_length():
        theta = to_mpfr(theta, bits + K.bit_length())
    S = _fourier_pairs(k, theta, K, bits + K.bit_length())
    sign = fourier_prefactor_sign(k)
    with workprec(bits):
        two_pi = 2 * gmpy2.const_pi()
        value = sign * math.factorial(k + 1) * S / two_pi ** (k + 1)
        return mpc(value, 0)


def sawtooth_defect(x, K: int, ctx: PrecisionContext = DEFAULT_CONTEXT) -> tuple[HPReal, HPReal]:
    """Both sides of |sum_{k<=K} sin(2 pi k x)/(pi k) + psi(x)| <= min(1/2, 1/((2K+1) pi |sin pi x|))."""
    if K < 1:
        raise ValueError("K must be >= 1")
    bits = ctx.working_bits(ops=K)
    partial = fourier_partial(0, x, K, ctx).real
    psi = periodic_bernoulli(1, x, ctx)
    with workprec(bits):
        psi = to_mpfr(psi, bits) if isinstance(psi, Fraction) else mpfr(psi)
        defect = abs(partial + psi)
        s = abs(e_unit((Fraction(x) if is_exact_rational(x) else x) / 2, bits).imag)
        half = mpfr(1) / 2
        if s == 0:
            bound = half
        else:
            bound = min(half, 1 / ((2 * K + 1) * gmpy2.const_pi() * s))
    return defect, bound
