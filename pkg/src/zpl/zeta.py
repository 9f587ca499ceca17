"""Riemann zeta by Euler-Maclaurin summation, the functional-equation factor
chi(s), and a Stirling-series log-gamma.

The Dirichlet head sum uses complete multiplicativity of m -> m^-s: only
prime powers p^-s are formed with exp/sin_cos, composites are products of
two earlier entries.  That keeps a call at height t to O(t / log t)
transcendental evaluations plus O(t) multiplications.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr, mpz

from .bernoulli import bernoulli_numbers
from .errors import PoleAtOne, PoleError, PrecisionExhausted, ValidationError
from .hp import DEFAULT_CONTEXT, HPComplex, PrecisionContext, to_mpfr, workprec

LN2 = math.log(2.0)
NU_MAX = 4000
M_FLOOR = 32


# -- sieve of smallest prime factors, grown on demand ----------------------

class _Sieve:
    def __init__(self):
        self._lock = threading.Lock()
        self.size = 0
        self.spf = np.zeros(1, dtype=np.int64)
        self.primes = np.zeros(0, dtype=np.int64)
        self.layers: list[np.ndarray] = []

    def ensure(self, n: int) -> None:
        if n <= self.size:
            return
        with self._lock:
            if n <= self.size:
                return
            size = max(n, 2 * self.size, 1024)
            spf = np.zeros(size + 1, dtype=np.int64)
            for p in range(2, math.isqrt(size) + 1):
                if spf[p] == 0:
                    block = spf[p * p :: p]
                    block[block == 0] = p
            idx = np.arange(size + 1, dtype=np.int64)
            is_prime = spf == 0
            is_prime[:2] = False
            spf[is_prime] = idx[is_prime]
            omega = np.zeros(size + 1, dtype=np.int64)
            for m in range(2, size + 1):
                omega[m] = omega[m // spf[m]] + 1
            top = int(omega.max())
            self.layers = [np.nonzero(omega == layer)[0] for layer in range(top + 1)]
            self.primes = self.layers[1]
            self.spf = spf
            self.size = size

    def view(self, n: int):
        """(primes <= n, [composite layers <= n]) with layers ordered by Omega."""
        self.ensure(n)
        cut = lambda a: a[: np.searchsorted(a, n, side="right")]
        return cut(self.primes), [cut(a) for a in self.layers[2:]]


_SIEVE = _Sieve()


def multiplicative_table(n: int, prime_value) -> np.ndarray:
    """Object array T with T[m] = f(m) for 1 <= m <= n, f completely multiplicative.

    ``prime_value(p)`` supplies f(p); must be called inside the desired
    working-precision context.
    """
    primes, layers = _SIEVE.view(n)
    spf = _SIEVE.spf
    table = np.empty(n + 1, dtype=object)
    table[0] = None
    table[1] = mpc(1)
    for p in primes.tolist():
        table[p] = prime_value(p)
    for idx in layers:
        if len(idx) == 0:
            continue
        f = spf[idx]
        table[idx] = table[f] * table[idx // f]
    return table


def unit_powers(t, n: int) -> np.ndarray:
    """T[m] = m^(-i t) for 1 <= m <= n at the current precision."""

    def at_prime(p):
        s, c = gmpy2.sin_cos(t * gmpy2.log(p))
        return mpc(c, -s)

    return multiplicative_table(n, at_prime)


def complex_powers(s: HPComplex, n: int) -> np.ndarray:
    """T[m] = m^(-s) for 1 <= m <= n at the current precision."""
    return multiplicative_table(n, lambda p: gmpy2.exp(-s * gmpy2.log(p)))


# -- Euler-Maclaurin planning ----------------------------------------------

@dataclass(frozen=True)
class ZetaPlan:
    M: int
    nu: int
    wp: int
    out_bits: int


def _log_bernoulli_ratio(two_j: int) -> float:
    """log(|B_2j| / (2j)!) from |B_2j| = 2 (2j)! zeta(2j) / (2 pi)^2j."""
    zeta_bound = 1.0 + 2.0 ** (1 - two_j)
    return math.log(2.0 * zeta_bound) - two_j * math.log(2 * math.pi)


def _choose_nu(sigma: float, t: float, M: int, goal: float) -> int | None:
    """Smallest nu whose remainder bound is below exp(goal); None if it stalls."""
    log_M = math.log(M)
    log_poch = 0.0  # log |s (s+1) ... (s+2 nu+1)|
    prev = math.inf
    j = 0
    for nu in range(0, NU_MAX + 1):
        while j <= 2 * nu + 1:
            mod = math.hypot(sigma + j, t)
            if mod == 0.0 and j <= 2 * nu:
                return nu  # series terminates at a non-positive integer s
            if mod == 0.0:
                mod = 1e-300
            log_poch += math.log(mod)
            j += 1
        if sigma + 2 * nu + 1 <= 0:
            continue
        bound = (
            log_poch
            + _log_bernoulli_ratio(2 * nu + 2)
            - math.log(sigma + 2 * nu + 1)
            - (sigma + 2 * nu + 1) * log_M
        )
        if bound < goal and nu >= 1:
            return nu
        if bound > prev and nu > 4:
            return None
        prev = bound
    return None


def zeta_plan(sigma: float, t: float, ctx: PrecisionContext, extra_bits: int = 0) -> ZetaPlan:
    """Truncation point M, correction depth nu and working precision for zeta(sigma + i t)."""
    t = abs(t)
    target = ctx.target_bits
    M = max(math.ceil(t / math.pi), M_FLOOR, math.ceil(1.3 * (target + 8) * LN2 / (2 * math.pi)))
    goal = -(target + 2) * LN2
    for _ in range(64):
        nu = _choose_nu(sigma, t, M, goal)
        if nu is not None:
            break
        M = math.ceil(M * 1.5)
    else:
        raise PrecisionExhausted(f"no Euler-Maclaurin depth below {NU_MAX} meets the budget")
    log2_M = math.log2(M)
    scale = math.ceil(max(0.0, 1.0 - sigma) * log2_M)
    phase = math.ceil(math.log2(t * math.log(M) + 2))
    wp = target + ctx.guard_bits + math.ceil(log2_M) + scale + phase + 8 + extra_bits
    ctx.check(wp)
    # |zeta| <= M^(1 - sigma) roughly; keep target absolute bits in the output.
    out_bits = target + ctx.guard_bits + scale
    return ZetaPlan(M, nu, wp, ctx.check(out_bits))


def _em_tail(s: HPComplex, M: int, nu: int, M_pow: HPComplex) -> HPComplex:
    """M^(1-s)/(s-1) + M^-s/2 + sum_{j<=nu} B_2j/(2j)! (s)_{2j-1} M^(-s-2j+1); M_pow = M^-s."""
    B = bernoulli_numbers(2 * nu)
    Mm = mpz(M)
    tail = M_pow * Mm / (s - 1) + M_pow / 2
    q = s / Mm
    fact = 2  # (2j)!
    M2 = Mm * Mm
    for j in range(1, nu + 1):
        b = B[2 * j]
        tail += M_pow * q * (mpfr(mpz(b.numerator)) / (b.denominator * fact))
        q = q * (s + (2 * j - 1)) * (s + 2 * j) / M2
        fact *= (2 * j + 1) * (2 * j + 2)
    return tail


def _check_pole(s: HPComplex, ctx: PrecisionContext) -> None:
    with workprec(max(s.real.precision, s.imag.precision) + 8):
        dist = abs(s - 1)
    if dist < ctx.budget():
        raise PoleAtOne("zeta has a pole at s = 1")


def _as_mpc(s, bits: int) -> HPComplex:
    if isinstance(s, HPComplex):
        return s
    if isinstance(s, Fraction):
        s = to_mpfr(s, bits)
    with workprec(bits):
        return mpc(s)


def zeta(s, ctx: PrecisionContext = DEFAULT_CONTEXT) -> HPComplex:
    """zeta(s) with absolute error <= 2^-target_bits."""
    s = _as_mpc(s, ctx.target_bits + ctx.guard_bits)
    if not (gmpy2.is_finite(s.real) and gmpy2.is_finite(s.imag)):
        raise ValidationError("zeta needs a finite argument")
    _check_pole(s, ctx)
    plan = zeta_plan(float(s.real), float(s.imag), ctx)
    with workprec(plan.wp):
        powers = complex_powers(s, plan.M)
        head = powers[1 : plan.M].sum()
        value = head + _em_tail(s, plan.M, plan.nu, powers[plan.M])
    with workprec(plan.out_bits):
        return mpc(value)


# -- Gamma via Stirling ----------------------------------------------------

def _stirling_terms(z_abs: float, z_arg: float, goal: float, j_max: int = 2000) -> int | None:
    """Terms J for log-gamma's Stirling series at |z|, arg z; None if it stalls."""
    sec = 1.0 / max(math.cos(z_arg / 2), 1e-300)
    log_z = math.log(z_abs)
    prev = math.inf
    for J in range(1, j_max):
        two_j = 2 * J
        # |B_2J| / (2J (2J-1) |z|^(2J-1)) * sec(arg/2)^(2J)
        bound = (
            _log_bernoulli_ratio(two_j)
            + math.lgamma(two_j + 1)
            - math.log(two_j * (two_j - 1))
            - (two_j - 1) * log_z
            + two_j * math.log(sec)
        )
        if bound < goal:
            return J
        if bound > prev:
            return None
        prev = bound
    return None


def loggamma(z, bits: int) -> HPComplex:
    """Principal log Gamma(z) for Re z > 0, absolute error about 2^-bits."""
    z = _as_mpc(z, bits)
    if z.real <= 0:
        raise ValidationError("loggamma needs Re z > 0; use gamma for the reflection")
    goal = -(bits + 4) * LN2
    radius = max(16.0, 0.12 * bits)
    zr, zi = float(z.real), float(z.imag)
    for _ in range(32):
        shift = 0 if math.hypot(zr, zi) >= radius else max(0, math.ceil(math.sqrt(max(radius**2 - zi**2, 0.0)) - zr))
        w_abs = math.hypot(zr + shift, zi)
        J = _stirling_terms(w_abs, math.atan2(zi, zr + shift), goal)
        if J is not None:
            break
        radius *= 2
    else:
        raise PrecisionExhausted("Stirling series failed to converge")
    wp = bits + 16 + shift.bit_length() + math.ceil(math.log2(w_abs * math.log(w_abs + 2) + 2))
    B = bernoulli_numbers(2 * J)
    with workprec(wp):
        w = z + shift
        value = (w - mpfr(1) / 2) * gmpy2.log(w) - w + gmpy2.log(2 * gmpy2.const_pi()) / 2
        inv = 1 / w
        inv2 = inv * inv
        power = inv
        for j in range(1, J + 1):
            b = B[2 * j]
            value += power * (mpfr(mpz(b.numerator)) / (b.denominator * (2 * j) * (2 * j - 1)))
            power *= inv2
        for i in range(shift):
            value -= gmpy2.log(z + i)
    with workprec(bits + 8):
        return mpc(value)


def gamma(z, bits: int) -> HPComplex:
    """Gamma(z) to relative accuracy about 2^-bits, reflection for Re z < 1/2."""
    z = _as_mpc(z, bits)
    size = float(abs(z))
    extra = math.ceil(math.log2(size * math.log(size + 2) + 2)) + 8
    if z.real < mpfr(1) / 2:
        if z.imag == 0 and gmpy2.is_integer(z.real):
            raise PoleError(f"Gamma has a pole at {z.real}")
        with workprec(bits + extra):
            pi = gmpy2.const_pi()
            value = pi / (gmpy2.sin(pi * z) * gmpy2.exp(loggamma(1 - z, bits + extra)))
    else:
        with workprec(bits + extra):
            value = gmpy2.exp(loggamma(z, bits + extra))
    with workprec(bits):
        return mpc(value)


# -- chi and the functional-equation oracle --------------------------------

def chi_log2_size(sigma: float, t: float) -> float:
    """Rough log2 |chi(sigma + i t)| ~ (1/2 - sigma) log2(|t| / 2 pi), for budgets."""
    return (0.5 - sigma) * math.log2(max(abs(t), 2 * math.pi) / (2 * math.pi) + 1) + 2


def chi(s, ctx: PrecisionContext = DEFAULT_CONTEXT) -> HPComplex:
    """chi(s) with zeta(s) = chi(s) zeta(1-s), absolute error <= 2^-target_bits.

    For Re s >= 1/2 the secant/Gamma form is used; to the left the
    sine/reflected-Gamma form, which has no removable singularities.
    """
    s = _as_mpc(s, ctx.target_bits + ctx.guard_bits)
    sigma, t = float(s.real), float(s.imag)
    size = chi_log2_size(sigma, t)
    bits = ctx.target_bits + ctx.guard_bits + max(0, math.ceil(size)) + 8
    extra = math.ceil(math.log2(abs(complex(sigma, t)) * math.log(abs(complex(sigma, t)) + 2) + 2)) + 8
    wp = ctx.check(bits + extra)
    with workprec(wp):
        pi = gmpy2.const_pi()
        if s.real >= mpfr(1) / 2:
            nearest = int(gmpy2.rint(s.real))
            if nearest % 2 == 1 and abs(s - nearest) < ctx.budget():
                raise PoleError(f"chi has a pole at s = {nearest}")
            value = gmpy2.exp((s - 1) * gmpy2.log(mpfr(2)) + s * gmpy2.log(pi))
            value /= gmpy2.cos(pi * s / 2) * gamma(s, bits)
        else:
            value = gmpy2.exp(s * gmpy2.log(mpfr(2)) + (s - 1) * gmpy2.log(pi))
            value *= gmpy2.sin(pi * s / 2) * gmpy2.exp(loggamma(1 - s, bits))
    with workprec(bits):
        return mpc(value)


def zeta_via_functional(s, ctx: PrecisionContext = DEFAULT_CONTEXT) -> HPComplex:
    """chi(s) * zeta(1-s): an independent route to zeta(s)."""
    s = _as_mpc(s, ctx.target_bits + ctx.guard_bits)
    sigma, t = float(s.real), float(s.imag)
    lift = max(0, math.ceil(chi_log2_size(sigma, t)))
    with workprec(max(s.real.precision, s.imag.precision) + 2):
        reflected = 1 - s
    z = zeta(reflected, ctx.with_target(ctx.target_bits + lift + 4))
    zmag = 0 if z == 0 else max(0, int(gmpy2.floor(gmpy2.log2(abs(z)))) + 1)
    c = chi(s, ctx.with_target(ctx.target_bits + zmag + 4))
    with workprec(max(c.real.precision, z.real.precision) + 8):
        value = c * z
    with workprec(ctx.target_bits + ctx.guard_bits + lift):
        return mpc(value)
