"""Zeta-side and Bernoulli-side sums over geometric progressions.

A progression is parameterized by (k, d, theta, N).  The points are
x_h = exp((h + theta)/d) for integers 0 < h < d log N; in the base
presentation d = 1/log b, theta = log(alpha)/log b and x_h = b^h alpha,
which is evaluated as that product (exactly, when alpha is rational).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd

import gmpy2
from gmpy2 import mpc, mpfr, mpz

from .bernoulli import bernoulli_number, fourier_prefactor_sign, periodic_bernoulli
from .errors import BadRatio, GridMismatch, PrecisionExhausted, ValidationError
from .exact import AlgebraicReal, ComputedReal, ExactReal, RationalReal, as_exact
from .grid import ZetaGrid, d_bits, zeta_grid
from .hp import (
    DEFAULT_CONTEXT,
    HPComplex,
    HPReal,
    PrecisionContext,
    dist_nearest_int,
    e_unit,
    is_exact_rational,
    to_mpfr,
    workprec,
)
from .zeta import zeta


def _inv_log(value: Fraction) -> ComputedReal:
    def fn(bits: int) -> HPReal:
        with workprec(bits + 16):
            x = 1 / gmpy2.log(to_mpfr(value, bits + 16))
        with workprec(bits):
            return mpfr(x)

    return ComputedReal(fn, f"1/log({value})")


def _log_ratio(alpha: ExactReal, b: int) -> ComputedReal:
    def fn(bits: int) -> HPReal:
        with workprec(bits + 16):
            x = gmpy2.log(alpha.at(bits + 16)) / gmpy2.log(mpfr(b))
        with workprec(bits):
            return mpfr(x)

    return ComputedReal(fn, f"log({alpha})/log({b})")


def _integer_log(value: Fraction, b: int) -> int | None:
    """j with value == b**j exactly, else None."""
    if value <= 0:
        return None
    guess = round((math.log(value.numerator) - math.log(value.denominator)) / math.log(b))
    for cand in (guess - 1, guess, guess + 1):
        if Fraction(b) ** cand == value:
            return cand
    return None


def exact_theta(b: int, alpha: ExactReal) -> Fraction | None:
    """log(alpha)/log(b) when it is a recognizably rational p/q (q <= 6)."""
    if alpha.rational is not None:
        j = _integer_log(alpha.rational, b)
        return Fraction(j) if j is not None else None
    if isinstance(alpha, AlgebraicReal):
        c = alpha.coeffs
        # x^q - c0 with a positive real root: alpha = c0^(1/q)
        if all(v == 0 for v in c[1:-1]) and c[-1] == 1 and c[0] < 0 and alpha.lo >= 0:
            q = len(c) - 1
            j = _integer_log(Fraction(-c[0]), b)
            if j is not None:
                return Fraction(j, q)
    return None


@dataclass(frozen=True)
class SumParams:
    """(k, d, theta, N) with an optional exact progression x_h = ratio^h * alpha."""

    k: int
    d: ExactReal
    theta: ExactReal
    N: int
    presentation: str = "raw"
    b: int | None = None
    alpha: ExactReal | None = None
    ratio: Fraction | None = None

    def __post_init__(self):
        if self.k < 0:
            raise ValidationError("k must be >= 0")
        if self.N < 2:
            raise ValidationError("N must be >= 2")
        if self.presentation not in ("raw", "base"):
            raise ValidationError(f"unknown presentation {self.presentation!r}")

    @classmethod
    def base(cls, k: int, b: int, alpha, N: int) -> "SumParams":
        if not isinstance(b, int) or b < 2:
            raise ValidationError("base b must be an integer >= 2")
        alpha = as_exact(alpha)
        if alpha.at(64) <= 0:
            raise ValidationError("alpha must be positive")
        theta_q = exact_theta(b, alpha)
        theta = RationalReal(theta_q) if theta_q is not None else _log_ratio(alpha, b)
        return cls(k, _inv_log(Fraction(b)), theta, N, "base", b, alpha, Fraction(b))

    @classmethod
    def raw(cls, k: int, d, theta, N: int) -> "SumParams":
        d, theta = as_exact(d), as_exact(theta)
        if d.at(64) <= 0:
            raise ValidationError("d must be positive")
        return cls(k, d, theta, N)

    def with_N(self, N: int) -> "SumParams":
        return SumParams(self.k, self.d, self.theta, N, self.presentation, self.b, self.alpha, self.ratio)

    def d_value(self, ctx: PrecisionContext) -> HPReal:
        return self.d.at(d_bits(ctx))

    def describe(self) -> dict:
        out = {"k": self.k, "N": self.N, "presentation": self.presentation}
        if self.presentation == "base":
            out["b"] = self.b
            out["alpha"] = str(self.alpha)
        elif self.ratio is not None:
            out["ratio"] = str(self.ratio)
        out["d"] = str(self.d)
        out["theta"] = str(self.theta)
        return out


def rational_ratio_params(u: int, v: int, k: int, N: int) -> SumParams:
    """d = 1/log(u/v), theta = 0, so that x_h = (u/v)^h exactly."""
    if gcd(u, v) != 1 or not u > v >= 2:
        raise BadRatio(f"need co-prime u > v >= 2, got u={u}, v={v}")
    r = Fraction(u, v)
    return SumParams(k, _inv_log(r), RationalReal(0), N, "raw", None, RationalReal(1), r)


# -- the h range -----------------------------------------------------------

@dataclass(frozen=True)
class HRange:
    h_max: int
    boundary_hit: bool

    @property
    def count(self) -> int:
        return max(0, self.h_max)

    def __iter__(self):
        return iter(range(1, self.h_max + 1))


def h_range(p: SumParams, ctx: PrecisionContext = DEFAULT_CONTEXT) -> HRange:
    """Integers h with 0 < h < d log N; a boundary within 2^-target is excluded and flagged."""
    if p.ratio is not None and p.ratio.denominator == 1:
        j = _integer_log(Fraction(p.N), p.ratio.numerator)
        if j is not None:
            return HRange(j - 1, True)
    bits = ctx.working_bits(extra=p.N.bit_length())
    with workprec(bits):
        L = p.d.at(bits) * gmpy2.log(mpfr(p.N))
        nearest = gmpy2.rint(L)
        if abs(L - nearest) < ctx.budget():
            return HRange(int(nearest) - 1, True)
        return HRange(int(gmpy2.ceil(L)) - 1, False)


def progression_point(p: SumParams, h: int, ctx: PrecisionContext = DEFAULT_CONTEXT, extra_bits: int = 0):
    """x_h = exp((h + theta)/d): a Fraction when exact, else an mpfr whose
    fractional part carries target + guard + extra_bits bits."""
    if p.ratio is not None and p.alpha is not None:
        power = p.ratio**h
        if p.alpha.rational is not None:
            return power * p.alpha.rational
        lead = max(0, math.ceil(h * math.log2(float(p.ratio)))) + 2
        bits = ctx.working_bits(extra=lead + extra_bits)
        a = p.alpha.at(bits + 8)
        with workprec(bits):
            return mpfr(mpz(power.numerator)) * a / power.denominator
    lead = max(0, math.ceil((h + float(p.theta)) / float(p.d) * math.log2(math.e))) + 2
    bits = ctx.working_bits(extra=lead + extra_bits + 8)
    with workprec(bits):
        return gmpy2.exp((h + p.theta.at(bits + 8)) / p.d.at(bits + 8))


def _real(x, bits: int) -> HPReal:
    return to_mpfr(x, bits) if is_exact_rational(x) else x


# -- sums -----------------------------------------------------------------

def _check_grid(p: SumParams, grid: ZetaGrid, ctx: PrecisionContext) -> None:
    grid.check(p.k, p.d_value(ctx), p.N)
    if grid.precision_bits < ctx.target_bits:
        raise GridMismatch("grid precision below the requested target")


def paired_zeta_sum(p: SumParams, grid: ZetaGrid, ctx: PrecisionContext = DEFAULT_CONTEXT) -> HPReal:
    """R = sum_{n<=N} 2 Re(w_n) (odd k) or 2 Im(w_n) (even k), w_n = zeta_n e(theta n)/n^(k+1).

    sum_{1<=|n|<=N} zeta(-k + 2 pi i d n) e(theta n)/n^(k+1) equals R for odd k
    and i R for even k, because zeta(conj s) = conj zeta(s).
    """
    _check_grid(p, grid, ctx)
    bits = ctx.working_bits(ops=p.N, extra=16)
    theta = p.theta.rational if p.theta.rational is not None else p.theta.at(bits + p.N.bit_length() + 8)
    use_imag = p.k % 2 == 0
    with workprec(bits):
        total = mpfr(0)
    for n in range(1, p.N + 1):
        if isinstance(theta, Fraction):
            arg = theta * n
        else:
            with workprec(theta.precision + n.bit_length()):
                arg = theta * n  # exact
        phase = e_unit(arg, bits)
        with workprec(bits):
            w = grid[n] * phase
            part = w.imag if use_imag else w.real
            total += 2 * part / mpz(n) ** (p.k + 1)
    return total


def zeta_side_sum(p: SumParams, grid: ZetaGrid, ctx: PrecisionContext = DEFAULT_CONTEXT) -> HPComplex:
    """(k+1)!/(2 pi i)^(k+1) sum_{1<=|n|<=N} zeta(-k + 2 pi i d n) e(theta n)/n^(k+1)."""
    R = paired_zeta_sum(p, grid, ctx)
    bits = R.precision
    with workprec(bits):
        value = fourier_prefactor_sign(p.k) * math.factorial(p.k + 1) * R / (2 * gmpy2.const_pi()) ** (p.k + 1)
        return mpc(value, 0)


def bernoulli_side_sum(p: SumParams, ctx: PrecisionContext = DEFAULT_CONTEXT) -> HPReal:
    """-d^k sum_{0<h<d log N} psi_{k+1}(x_h)."""
    rng = h_range(p, ctx)
    bits = ctx.working_bits(ops=max(rng.count, 1), extra=8)
    exact = Fraction(0)
    with workprec(bits):
        approx = mpfr(0)
    for h in rng:
        term = periodic_bernoulli(p.k + 1, progression_point(p, h, ctx), ctx)
        if isinstance(term, Fraction):
            exact += term
        else:
            with workprec(bits):
                approx += term
    with workprec(bits):
        total = approx + to_mpfr(exact, bits)
        return -(p.d.at(bits) ** p.k) * total


def _sine_inner(x, K: int, bits: int) -> HPReal:
    """sum_{n=1}^K sin(2 pi n x)/(n pi)."""
    with workprec(bits):
        acc = mpfr(0)
    for n in range(1, K + 1):
        z = e_unit(x * n, bits)
        with workprec(bits):
            acc += z.imag / n
    with workprec(bits):
        return acc / gmpy2.const_pi()


def sine_cutoff(p: SumParams, x, ctx: PrecisionContext) -> int:
    """floor(d N / x_h), from the same x_h as the outer term."""
    bits = ctx.working_bits(extra=p.N.bit_length() + 8)
    if is_exact_rational(x):
        with workprec(bits):
            q = p.d.at(bits) * p.N / to_mpfr(x, bits)
    else:
        with workprec(bits):
            q = p.d.at(bits) * p.N / x
    return int(gmpy2.floor(q))


def sine_terms(p: SumParams, ctx: PrecisionContext = DEFAULT_CONTEXT) -> list:
    """Per-h rows (h, x_h, K_h, inner sine sum, psi_1(x_h), envelope term)."""
    if p.k != 0:
        raise ValidationError("the sine double sum is defined for k = 0 only")
    rows = []
    bits = ctx.working_bits(extra=8)
    for h in h_range(p, ctx):
        x0 = progression_point(p, h, ctx)
        K = sine_cutoff(p, x0, ctx)
        # n x_h needs log2(K) more fractional bits than x_h alone.
        x = x0 if is_exact_rational(x0) else progression_point(p, h, ctx, extra_bits=K.bit_length() + 8)
        inner = _sine_inner(x, K, bits + K.bit_length())
        psi = periodic_bernoulli(1, x, ctx)
        rows.append((h, x, K, inner, psi, _envelope_term(p, x, bits)))
    return rows


def _envelope_term(p: SumParams, x, bits: int) -> HPReal:
    """min(1/2, 1/(2 pi ||x|| (2 d N / x + 1)))."""
    gap = dist_nearest_int(x)
    with workprec(bits):
        half = mpfr(1) / 2
        if gap == 0:
            return half
        xr = _real(x, bits)
        denom = 2 * gmpy2.const_pi() * _real(gap, bits) * (2 * p.d.at(bits) * p.N / xr + 1)
        return min(half, 1 / denom)


def sine_double_sum(p: SumParams, ctx: PrecisionContext = DEFAULT_CONTEXT) -> HPReal:
    """sum_{0<h<d log N} sum_{n <= d N / x_h} sin(2 pi n x_h)/(n pi)."""
    bits = ctx.working_bits(extra=8)
    with workprec(bits):
        total = mpfr(0)
        for row in sine_terms(p, ctx):
            total += row[3]
        return total


def gn_envelope(p: SumParams, ctx: PrecisionContext = DEFAULT_CONTEXT) -> HPReal:
    """sum_{0<h<d log N} min(1/2, 1/(2 pi ||x_h|| (2 d N / x_h + 1)))."""
    if p.k != 0:
        raise ValidationError("the G_N envelope is defined for k = 0 only")
    bits = ctx.working_bits(extra=8)
    with workprec(bits):
        total = mpfr(0)
    for h in h_range(p, ctx):
        term = _envelope_term(p, progression_point(p, h, ctx), bits)
        with workprec(bits):
            total += term
    return total


@dataclass
class SumReport:
    params: SumParams
    zeta_side: HPComplex
    bernoulli_side: HPReal
    difference: HPReal
    normalized: HPReal
    h_count: int
    statistic: HPReal
    boundary_hit: bool = False
    sine_side: HPReal | None = None
    gn_envelope: HPReal | None = None
    sine_defect: HPReal | None = None
    cache_keys: list = field(default_factory=list)


def normality_from_paired(p: SumParams, R: HPReal) -> HPReal:
    with workprec(R.precision):
        return R / gmpy2.log(mpfr(p.N))


def normality_statistic(p: SumParams, grid: ZetaGrid, ctx: PrecisionContext = DEFAULT_CONTEXT) -> HPReal:
    """(1/log N) sum_{1<=|n|<=N} zeta(-k + 2 pi i d n) e(theta n)/n^(k+1), as a real number.

    The sum is real for odd k and purely imaginary for even k; the nonzero
    component is returned (the imaginary part for even k).
    """
    return normality_from_paired(p, paired_zeta_sum(p, grid, ctx))


def compare(
    p: SumParams,
    ctx: PrecisionContext = DEFAULT_CONTEXT,
    *,
    grid: ZetaGrid | None = None,
    workers: int = 1,
    cache=None,
) -> SumReport:
    """Both sides of the progression identity, with diagnostics."""
    if grid is None:
        grid = zeta_grid(p.k, p.d_value(ctx), p.N, ctx, workers=workers, cache=cache)
    R = paired_zeta_sum(p, grid, ctx)
    bits = R.precision
    with workprec(bits):
        zs = fourier_prefactor_sign(p.k) * math.factorial(p.k + 1) * R / (2 * gmpy2.const_pi()) ** (p.k + 1)
        zeta_side = mpc(zs, 0)
    bern = bernoulli_side_sum(p, ctx)
    rng = h_range(p, ctx)
    with workprec(bits):
        diff = abs(zs - bern)
        normalized = diff / gmpy2.log(mpfr(p.N))
    report = SumReport(
        params=p,
        zeta_side=zeta_side,
        bernoulli_side=bern,
        difference=diff,
        normalized=normalized,
        h_count=rng.count,
        statistic=normality_from_paired(p, R),
        boundary_hit=rng.boundary_hit,
        cache_keys=list(grid.cache_keys),
    )
    if p.k == 0:
        rows = sine_terms(p, ctx)
        with workprec(bits):
            report.sine_side = sum((r[3] for r in rows), mpfr(0))
            report.gn_envelope = sum((r[5] for r in rows), mpfr(0))
            psi_sum = sum((_real(r[4], bits) for r in rows), mpfr(0))
            report.sine_defect = abs(report.sine_side + psi_sum)
    return report


def special_value_reference(k: int, b: int, ctx: PrecisionContext = DEFAULT_CONTEXT) -> HPReal:
    """Limit of the normality statistic at alpha = 1:
    -(-1)^((k+1)/2) (2 pi)^(k+1) B_{k+1} / ((k+1)! log^(k+1) b) for odd k, 0 for even k.

    For odd k the same value is also formed as 2 zeta(k+1)/log^(k+1) b and
    the two routes must agree within the budget.
    """
    if k < 0 or b < 2:
        raise ValidationError("need k >= 0 and b >= 2")
    bits = ctx.working_bits(extra=8)
    if k % 2 == 0:
        with workprec(bits):
            return mpfr(0)
    B = bernoulli_number(k + 1)
    sign = -1 if ((k + 1) // 2) % 2 == 0 else 1  # -(-1)^((k+1)/2)
    with workprec(bits):
        logb = gmpy2.log(mpfr(b)) ** (k + 1)
        closed = sign * (2 * gmpy2.const_pi()) ** (k + 1) * to_mpfr(B, bits) / (math.factorial(k + 1) * logb)
    z = zeta(k + 1, ctx.with_target(ctx.target_bits + 8))
    with workprec(bits):
        via_zeta = 2 * z.real / logb
        if abs(closed - via_zeta) > ctx.budget(4):
            raise PrecisionExhausted("special-value routes disagree beyond the budget")
    return closed
