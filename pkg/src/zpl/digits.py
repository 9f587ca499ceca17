"""b-adic digits of exact reals, digit frequencies, ergodic averages of
psi_{k+1}(b^h x), star discrepancy and the power-gap profile ||b^h x||."""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import gmpy2
from gmpy2 import mpfr, mpz

from .bernoulli import periodic_bernoulli
from .errors import DigitUncertain, ValidationError
from .exact import ComputedReal, ExactReal, RationalReal, as_exact
from .hp import (
    DEFAULT_CONTEXT,
    HPReal,
    PrecisionContext,
    dist_nearest_int,
    format_decimal,
    frac,
    to_mpfr,
    workprec,
)

SLACK_BITS = 64


@dataclass(frozen=True)
class DigitProfile:
    """Digits of x in base b.

    ``integer_digits`` are c_{-m} ... c_0 (most significant first, so
    ``start_index`` = -m); ``digits`` are the fractional digits, indexed from
    j = 0 for the first digit after the point.  Counts cover j in [0, l].
    """

    base: int
    start_index: int
    integer_digits: tuple
    digits: tuple
    l: int
    counts: tuple

    def count(self, a: int, l: int | None = None) -> int:
        """A_b(l; a, x): occurrences of digit a among fractional positions 0..l."""
        if l is None or l == self.l:
            return self.counts[a]
        if not 0 <= l < len(self.digits):
            raise ValidationError(f"l={l} outside the expanded range")
        return sum(1 for c in self.digits[: l + 1] if c == a)


def _floor_times_power(x: ExactReal, b: int, L: int) -> int:
    """floor(x * b^L) with the slack test that makes the last digit trustworthy."""
    scale = b**L
    if x.rational is not None:
        return math.floor(x.rational * scale)
    bits = math.ceil(L * math.log2(b)) + SLACK_BITS + 8
    if isinstance(x, ComputedReal):
        # No enclosure: treat the value as exact to within 4 ulp.
        with workprec(bits + 16):
            v = x.at(bits + 16)
            X = int(gmpy2.floor(gmpy2.mul_2exp(v, bits)))
        lo, hi = X - 4, X + 5
    else:
        X, exact = x.floor_scaled(bits)
        if exact:
            lo, hi = X, X
        else:
            lo, hi = X, X + 1
    # x * b^L lies in [lo, hi] / 2^bits.
    D = (lo * scale) >> bits
    margin = 1 << (bits - SLACK_BITS)
    if lo == hi and (lo * scale) % (1 << bits) == 0:
        return D
    below = lo * scale - (D << bits)
    above = ((D + 1) << bits) - hi * scale
    if below < margin or above < margin:
        raise DigitUncertain(L, bits)
    return D


def _to_base(n: int, b: int, width: int | None = None) -> list[int]:
    if width == 0:
        return []
    s = gmpy2.digits(mpz(n), b) if b <= 62 else None
    if s is not None:
        out = [int(c, 36) if b <= 36 else _digit62(c) for c in s]
    else:
        out = []
        while n:
            n, r = divmod(n, b)
            out.append(r)
        out.reverse()
        out = out or [0]
    if width is not None:
        out = [0] * (width - len(out)) + out
    return out


def _digit62(c: str) -> int:
    if c.isdigit():
        return int(c)
    if c.isupper():
        return ord(c) - ord("A") + 10
    return ord(c) - ord("a") + 36


def expand_digits(x, b: int, L: int) -> DigitProfile:
    """Canonical base-b expansion: integer digits plus fractional digits j = 0..L."""
    if not isinstance(b, int) or b < 2:
        raise ValidationError("base must be an integer >= 2")
    if L < 0:
        raise ValidationError("L must be >= 0")
    x = as_exact(x) if not isinstance(x, HPReal) else RationalReal(Fraction(*x.as_integer_ratio()))
    if x.at(64) <= 0:
        raise ValidationError("x must be positive")
    width = L + 1
    D = _floor_times_power(x, b, width)
    integer, fractional = divmod(D, b**width)
    int_digits = _to_base(integer, b) if integer else [0]
    frac_digits = _to_base(fractional, b, width)
    counts = [0] * b
    for c in frac_digits:
        counts[c] += 1
    return DigitProfile(b, 1 - len(int_digits), tuple(int_digits), tuple(frac_digits), L, tuple(counts))


def frequency_deviation(profile: DigitProfile) -> list[Fraction]:
    """A_b(l; a, x)/l - 1/b for each digit a (exact rationals)."""
    if profile.l < 1:
        raise ValidationError("frequency deviation needs l >= 1")
    return [Fraction(c, profile.l) - Fraction(1, profile.base) for c in profile.counts]


def power_point(x: ExactReal, b: int, h: int, ctx: PrecisionContext = DEFAULT_CONTEXT, extra_bits: int = 0):
    """b^h x, exact when x is rational, else with target + guard fractional bits."""
    if x.rational is not None:
        return x.rational * b**h
    lead = math.ceil(h * math.log2(b) + max(0.0, math.log2(abs(float(x)) + 1))) + 2
    bits = ctx.working_bits(extra=lead + extra_bits)
    v = x.at(bits + 8)
    with workprec(bits):
        return v * mpz(b) ** h


def ergodic_bernoulli_average(x, b: int, k: int, H: int, ctx: PrecisionContext = DEFAULT_CONTEXT):
    """(1/H) sum_{h=1}^H psi_{k+1}(b^h x); exact Fraction for rational x."""
    if H < 1 or k < 0:
        raise ValidationError("need H >= 1 and k >= 0")
    x = as_exact(x)
    exact = Fraction(0)
    bits = ctx.working_bits(ops=H)
    with workprec(bits):
        approx = mpfr(0)
    for h in range(1, H + 1):
        term = periodic_bernoulli(k + 1, power_point(x, b, h, ctx), ctx)
        if isinstance(term, Fraction):
            exact += term
        else:
            with workprec(bits):
                approx += term
    if x.rational is not None:
        return exact / H
    with workprec(bits):
        return (approx + to_mpfr(exact, bits)) / H


def star_discrepancy(points: Sequence, exact: bool = True, resolution: int = 4096):
    """D*_H of points in [0, 1).

    exact=True uses the sorted-sample formula max_i max(i/H - u_(i), u_(i) - (i-1)/H).
    exact=False bins the points into ``resolution`` cells and evaluates the
    deviation at cell edges, giving a lower bound within 1/resolution of D*.
    """
    H = len(points)
    if H == 0:
        raise ValidationError("star discrepancy needs at least one point")
    vals = [p if isinstance(p, (Fraction, int, HPReal)) else mpfr(p) for p in points]
    for v in vals:
        if not 0 <= v < 1:
            raise ValidationError("points must lie in [0, 1)")
    if exact and all(isinstance(v, (Fraction, int)) for v in vals):
        return max(
            max(Fraction(i, H) - u, u - Fraction(i - 1, H)) for i, u in enumerate(sorted(vals), start=1)
        )
    if exact:
        with workprec(max([v.precision for v in vals if isinstance(v, HPReal)] + [64]) + 8):
            best = mpfr(0)
            for i, u in enumerate(sorted(vals), start=1):
                u = to_mpfr(u, best.precision) if isinstance(u, (Fraction, int)) else u
                best = max(best, mpfr(i) / H - u, u - mpfr(i - 1) / H)
            return best
    def cell(v):
        if isinstance(v, HPReal):
            with workprec(v.precision + resolution.bit_length()):
                v = v * resolution  # exact
        else:
            v = v * resolution
        return min(math.floor(v), resolution - 1)

    cells = Counter(cell(v) for v in vals)
    best, seen = 0.0, 0
    for j in range(resolution):
        lo_dev = abs(seen / H - j / resolution)
        seen += cells.get(j, 0)
        hi_dev = abs(seen / H - (j + 1) / resolution)
        best = max(best, lo_dev, hi_dev)
    return mpfr(best)


def progression_fractions(x, b: int, H: int, ctx: PrecisionContext = DEFAULT_CONTEXT) -> list:
    """{b^h x} for h = 1..H."""
    x = as_exact(x)
    return [frac(power_point(x, b, h, ctx)) for h in range(1, H + 1)]


@dataclass(frozen=True)
class GapProfile:
    gamma: Fraction | float
    gaps: tuple  # (h, ||b^h x||)
    running_min: tuple  # (h, min_{h' <= h} ||b^h' x|| b^(gamma h'))


def power_gap_profile(x, b: int, H: int, gamma=Fraction(1, 10), ctx: PrecisionContext = DEFAULT_CONTEXT) -> GapProfile:
    """||b^h x|| for h = 1..H and the running minimum of ||b^h x|| b^(gamma h)."""
    if H < 1:
        raise ValidationError("H must be >= 1")
    x = as_exact(x)
    gamma = Fraction(gamma) if isinstance(gamma, (int, str, Fraction)) else gamma
    bits = ctx.working_bits(extra=8)
    gaps, mins = [], []
    current = None
    for h in range(1, H + 1):
        g = dist_nearest_int(power_point(x, b, h, ctx))
        gaps.append((h, g))
        with workprec(bits):
            gv = to_mpfr(g, bits) if isinstance(g, Fraction) else mpfr(g)
            scaled = gv * gmpy2.exp(to_mpfr(Fraction(gamma) * h, bits) * gmpy2.log(mpfr(b)))
            current = scaled if current is None else min(current, scaled)
        mins.append((h, current))
    return GapProfile(gamma, tuple(gaps), tuple(mins))


def dump_digits(profile: DigitProfile) -> str:
    """Plain text, one 'index digit' line per digit; the index i is the exponent in c_i b^-i."""
    lines = []
    for offset, c in enumerate(profile.integer_digits):
        lines.append(f"{profile.start_index + offset} {c}")
    for j, c in enumerate(profile.digits):
        lines.append(f"{j + 1} {c}")
    return "\n".join(lines) + "\n"


def profile_csv(profile: DigitProfile, digits: int = 38) -> str:
    """CSV rows (a, count, frequency, deviation) with l in the frequency denominator."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["a", "count", "frequency", "deviation"])
    devs = frequency_deviation(profile)
    for a, c in enumerate(profile.counts):
        freq = Fraction(c, profile.l)
        w.writerow([a, c, format_decimal(freq, digits), format_decimal(devs[a], digits)])
    return buf.getvalue()


def running_discrepancy(points: Iterable, checkpoints: Sequence[int]) -> list:
    pts = list(points)
    return [(H, star_discrepancy(pts[:H])) for H in checkpoints if H <= len(pts)]
