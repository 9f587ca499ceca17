"""Numerical audits of the mean-value argument: the phases F_m, the
functional-equation step, the Euler-Maclaurin step, first/second derivative
tests and the stationary-phase main term."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr

from .errors import HypothesisUnverified, ValidationError
from .exact import as_exact
from .hp import DEFAULT_CONTEXT, HPComplex, HPReal, PrecisionContext, e_unit, workprec
from .quad import LinearPhase, Window, amplitude, composite_nodes, integrate
from .zeta import zeta

C_AUDIT = 4
M_FACTOR = 4  # default M = 4 N in the functional-equation step


def _real(x, bits: int) -> HPReal:
    if isinstance(x, HPReal):
        return x
    return as_exact(x).at(bits)


@dataclass(frozen=True)
class PhaseSpec:
    """f(u) = F_m(u) - h u with F_m(u) = d u log(m e/(d u)) + theta u."""

    m: int
    d: object
    theta: object
    h: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValidationError("m must be >= 1")
        if _real(self.d, 64) <= 0:
            raise ValidationError("d must be positive")

    def _dt(self):
        bits = gmpy2.get_context().precision
        return _real(self.d, bits), _real(self.theta, bits)

    def F(self, u):
        d, t = self._dt()
        return d * u * gmpy2.log(self.m * gmpy2.exp(1) / (d * u)) + t * u

    def F1(self, u):
        d, t = self._dt()
        return d * gmpy2.log(self.m / (d * u)) + t

    def F2(self, u):
        d, _ = self._dt()
        return -d / u

    def xi(self):
        d, t = self._dt()
        return self.m / d * gmpy2.exp((t - self.h) / d)

    # phase protocol used by the quadrature: f = F_m - h u
    def value(self, u):
        return self.F(u) - self.h * u

    def deriv(self, u):
        return self.F1(u) - self.h

    def deriv2(self, u):
        return self.F2(u)


def phase_values(spec: PhaseSpec, u, ctx: PrecisionContext = DEFAULT_CONTEXT):
    """(F_m(u), F_m'(u), F_m''(u), xi_{m,h})."""
    bits = ctx.working_bits()
    with workprec(bits):
        u = mpfr(u)
        if u <= 0:
            raise ValidationError("u must be positive")
        return spec.F(u), spec.F1(u), spec.F2(u), spec.xi()


def window_defaults(N: int) -> dict:
    """X, V and the h cut-off H = 8 log^2(M N) with M = 4 N."""
    L = math.log(N)
    LL = math.log(L)
    M = M_FACTOR * N
    return {
        "X": math.ceil(L ** (4 / 3) * LL ** (-20 / 9)),
        "V": L ** (-1 / 3) * LL ** (5 / 9),
        "H": 8 * math.log(M * N) ** 2,
        "M": M,
    }


@dataclass
class ProbeReport:
    probe: str
    params: dict
    lhs: object
    rhs: object
    residual: object
    bound: object = None
    passed: bool = True
    extra: dict = field(default_factory=dict)


# -- stationary phase -----------------------------------------------------

@dataclass(frozen=True)
class StationaryPhase:
    integral: HPComplex
    main_term: HPComplex
    boundary_terms: HPComplex
    residual: HPReal
    xi: HPReal
    error: float


def stationary_phase_check(spec: PhaseSpec, U, ctx: PrecisionContext = DEFAULT_CONTEXT) -> StationaryPhase:
    """Compare the integral of u^(-1/2) e(F_m(u) - h u) over [(1-U) xi, (1+U) xi]
    with g(xi) e(f(xi) - 1/8)/sqrt|f''(xi)| plus the two endpoint terms."""
    bits = ctx.working_bits()
    with workprec(bits):
        U = _real(U, bits)
        if not 0 < U <= mpfr(1) / 2:
            raise ValidationError("U must lie in (0, 1/2]")
        xi = spec.xi()
        a, b = (1 - U) * xi, (1 + U) * xi
    if a <= 0:
        raise ValidationError("window must stay in u > 0")
    quad = integrate("inv_sqrt", spec, Window(a, b), ctx)
    with workprec(bits):
        g = amplitude("inv_sqrt")
        fxi = spec.value(xi)
        main = g(xi) * e_unit(fxi - mpfr(1) / 8, bits) / gmpy2.sqrt(abs(spec.deriv2(xi)))
        two_pi_i = mpc(0, 2 * gmpy2.const_pi())

        def end(u):
            return g(u) * e_unit(spec.value(u), bits) / (two_pi_i * spec.deriv(u))

        boundary = end(b) - end(a)
        residual = abs(quad.value - main - boundary)
    return StationaryPhase(quad.value, main, boundary, residual, xi, quad.error)


# -- derivative tests -----------------------------------------------------

@dataclass(frozen=True)
class AuditResult:
    kind: str
    integral_abs: HPReal
    bound: HPReal
    violation: bool


def _monotone(values) -> bool:
    diffs = [b - a for a, b in zip(values, values[1:])]
    return all(x >= 0 for x in diffs) or all(x <= 0 for x in diffs)


def derivative_test_audit(kind: str, g, f, window: Window, ctx: PrecisionContext = DEFAULT_CONTEXT) -> AuditResult:
    """|integral of g e(f)| against the first (1/min|f'/g|) or second
    (max|g| r^(-1/2), r = min|f''|) derivative-test bound, with constant C_AUDIT."""
    bits = ctx.working_bits()
    amp = amplitude(g)
    with workprec(bits):
        pts = window.points(bits)
        gs = [amp(u) for u in pts]
        d1 = [f.deriv(u) for u in pts]
        if kind == "first":
            if any(v == 0 for v in d1) or not (all(v > 0 for v in d1) or all(v < 0 for v in d1)):
                raise HypothesisUnverified("f' changes sign or vanishes on the window")
            ratio = [gv / dv for gv, dv in zip(gs, d1)]
            if not _monotone(ratio):
                raise HypothesisUnverified("g/f' is not monotone on the window")
            M = min(abs(dv / gv) for gv, dv in zip(gs, d1))
            bound = 1 / M
        elif kind == "second":
            d2 = [f.deriv2(u) for u in pts]
            if not (all(v > 0 for v in d2) or all(v < 0 for v in d2)):
                raise HypothesisUnverified("f'' changes sign or vanishes on the window")
            # g/f' must be monotone on each side of the stationary point
            left = [gv / dv for gv, dv in zip(gs, d1) if dv < 0]
            right = [gv / dv for gv, dv in zip(gs, d1) if dv > 0]
            if not (_monotone(left) and _monotone(right)):
                raise HypothesisUnverified("g/f' is not piecewise monotone on the window")
            r = min(abs(v) for v in d2)
            bound = max(abs(v) for v in gs) / gmpy2.sqrt(r)
        else:
            raise ValidationError(f"unknown derivative test {kind!r}")
    value = integrate(g, f, window, ctx).value
    with workprec(bits):
        integral_abs = abs(value)
        return AuditResult(kind, integral_abs, bound, bool(integral_abs > C_AUDIT * bound))


# -- functional-equation step ---------------------------------------------

def _phases(d: float, theta: float, m: np.ndarray, u: np.ndarray) -> np.ndarray:
    return d * u * np.log(m * math.e / (d * u)) + theta * u


def step1_sides(sigma, d, theta, N: int, M: int | None = None, ctx: PrecisionContext = DEFAULT_CONTEXT):
    """Both sides of
    sum_n zeta(sigma + 2 pi i d n) e(theta n)/n^(1-sigma)
      ~ D sum_{m<=M} m^(sigma-1) sum_{n<=N} e(F_m(n))/n^(1/2),  D = e(1/8) d^(1/2-sigma).

    The left side uses the zeta engine; the right double sum is formed in
    double precision (its terms are O(1) and there are at most M N of them).
    """
    if M is None:
        M = M_FACTOR * N
    if M < 2 * N:
        raise ValidationError("need M >= 2 N")
    if N > 500:
        raise ValidationError("N is capped at 500 for this probe")
    bits = ctx.working_bits(ops=N)
    with workprec(bits):
        sig, dd, th = _real(sigma, bits), _real(d, bits), _real(theta, bits)
        if sig > 0:
            raise ValidationError("sigma must be <= 0")
        lhs = mpc(0)
        two_pi = 2 * gmpy2.const_pi()
    for n in range(1, N + 1):
        with workprec(bits):
            s = mpc(sig, two_pi * dd * n)
        z = zeta(s, ctx)
        with workprec(bits):
            lhs += z * e_unit(th * n, bits) / gmpy2.exp((1 - sig) * gmpy2.log(n))
    fs, fd, ft = float(sig), float(dd), float(th)
    m = np.arange(1, M + 1, dtype=float)[:, None]
    n = np.arange(1, N + 1, dtype=float)[None, :]
    phase = _phases(fd, ft, m, n)
    inner = (np.exp(2j * np.pi * phase) / np.sqrt(n)).sum(axis=1)
    D = np.exp(2j * np.pi / 8) * fd ** (0.5 - fs)
    rhs = D * (m[:, 0] ** (fs - 1) * inner).sum()
    return complex(lhs), complex(rhs)


def step1_residual(sigma, d, theta, N: int, M: int | None = None, ctx: PrecisionContext = DEFAULT_CONTEXT) -> float:
    lhs, rhs = step1_sides(sigma, d, theta, N, M, ctx)
    return abs(lhs - rhs)


# -- Euler-Maclaurin step -------------------------------------------------

@dataclass(frozen=True)
class EMStep:
    lhs: complex
    integral: complex
    h_sum: complex
    remainder: complex
    residual: float
    tail_estimate: float


def _em_parts(m: int, N: int, d: float, theta: float, H: int):
    """Double-precision pieces of the Euler-Maclaurin identity for
    sum_{n<=N} e(F_m(n))/n^(1/2)."""
    F = lambda u: d * u * np.log(m * math.e / (d * u)) + theta * u
    F1 = lambda u: d * np.log(m / (d * u)) + theta
    n = np.arange(1, N + 1, dtype=float)
    lhs = (np.exp(2j * np.pi * F(n)) / np.sqrt(n)).sum()

    # Unit intervals [j, j+1]; the kernel sum_{1<=|h|<=H} e(-h v)/h is periodic in v.
    panels = max(64, 4 * H)
    v, w = composite_nodes(0.0, 1.0, panels)
    hs = np.arange(1, H + 1, dtype=float)
    kernel = -2j * (np.sin(2 * np.pi * np.outer(v, hs)) / hs).sum(axis=1)
    psi = v - 0.5
    integral = h_sum = rem = 0j
    for j in range(1, N):
        u = j + v
        e = np.exp(2j * np.pi * F(u))
        integral += (w * e / np.sqrt(u)).sum()
        h_sum += (w * kernel * F1(u) * e / np.sqrt(u)).sum()
        rem += (w * psi * e / u**1.5).sum()
    boundary = 0.5 * (np.exp(2j * np.pi * F(1.0)) + np.exp(2j * np.pi * F(float(N))) / math.sqrt(N))
    remainder = -0.5 * rem + boundary
    return lhs, integral, h_sum, remainder


def em_tail_estimate(m: int, N: int, d: float, theta: float, H: int) -> float:
    """sum_{|h|>H} (|a_h(1)| + |a_h(N)|)/|h| with a_h(u) = u^(-1/2) F'(u)/(h - F'(u))."""
    ends = [(1.0, d * math.log(m / d) + theta), (float(N), d * math.log(m / (d * N)) + theta)]
    K = 100 * H
    total = 0.0
    hs = np.arange(H + 1, K + 1, dtype=float)
    for u, f1 in ends:
        for sign in (1, -1):
            total += (abs(f1) / math.sqrt(u) / np.abs(sign * hs - f1) / hs).sum()
        # beyond K: |a_h| <= 2|F'|/(sqrt(u) h) once h >= 2|F'|
        total += 4 * abs(f1) / (math.sqrt(u) * K)
    return float(total)


def em_step_residual(m: int, N: int, d, theta, H_cut: int, ctx: PrecisionContext = DEFAULT_CONTEXT) -> EMStep:
    """|lhs - (integral + h-sum over 1<=|h|<=H_cut + R_m)| with the h-tail estimate."""
    if N > 200 or N < 2:
        raise ValidationError("need 2 <= N <= 200 for this probe")
    if m < 1 or H_cut < 1:
        raise ValidationError("need m >= 1 and H_cut >= 1")
    fd, ft = float(_real(d, 64)), float(_real(theta, 64))
    lhs, integral, h_sum, remainder = _em_parts(m, N, fd, ft, H_cut)
    residual = abs(lhs - (integral + h_sum + remainder))
    return EMStep(lhs, integral, h_sum, remainder, float(residual), em_tail_estimate(m, N, fd, ft, H_cut))
