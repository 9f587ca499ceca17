"""Oscillation-aware adaptive Gauss-Legendre quadrature for integrals
of g(u) e(f(u)) over a finite window."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Callable

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr

from .errors import QuadratureNonConvergent, ValidationError
from .hp import DEFAULT_CONTEXT, HPComplex, PrecisionContext, to_mpfr, workprec

LOW, HIGH = 16, 32
MAX_PANELS = 50_000

_nodes_lock = threading.Lock()
_nodes: dict[tuple[int, int], tuple[list, list]] = {}


def gauss_legendre(n: int, bits: int) -> tuple[list, list]:
    """Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1], n even."""
    if n < 2 or n % 2:
        raise ValueError("n must be a positive even integer")
    key = (n, bits)
    with _nodes_lock:
        hit = _nodes.get(key)
    if hit is not None:
        return hit
    xs, ws = [], []
    with workprec(bits + 16):
        eps = gmpy2.mul_2exp(mpfr(1), -(bits + 8))
        for i in range(1, n // 2 + 1):
            x = gmpy2.cos(gmpy2.const_pi() * (i - mpfr(1) / 4) / (n + mpfr(1) / 2))
            for _ in range(100):
                p0, p1 = mpfr(1), x
                for j in range(2, n + 1):
                    p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
                dp = n * (x * p1 - p0) / (x * x - 1)
                dx = p1 / dp
                x -= dx
                if abs(dx) < eps:
                    break
            p0, p1 = mpfr(1), x
            for j in range(2, n + 1):
                p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
            dp = n * (x * p1 - p0) / (x * x - 1)
            w = 2 / ((1 - x * x) * dp * dp)
            xs += [x, -x]
            ws += [w, w]
    out = ([mpfr(x, bits) for x in xs], [mpfr(w, bits) for w in ws])
    with _nodes_lock:
        _nodes[key] = out
    return out


@dataclass(frozen=True)
class LinearPhase:
    """f(u) = slope * u + offset."""

    slope: object = 0
    offset: object = 0

    def value(self, u):
        return self.slope * u + self.offset

    def deriv(self, u):
        return mpfr(self.slope) if not isinstance(self.slope, mpfr) else self.slope

    def deriv2(self, u):
        return mpfr(0)


def amplitude(g) -> Callable:
    """'inv_sqrt' -> u^(-1/2), 'one' -> 1, or a callable sampled at the nodes."""
    if g == "inv_sqrt":
        return lambda u: 1 / gmpy2.sqrt(u)
    if g == "one":
        return lambda u: mpfr(1)
    if callable(g):
        return g
    raise ValidationError(f"unknown amplitude {g!r}")


@dataclass(frozen=True)
class Window:
    a: object
    b: object
    samples: int = 64

    def __post_init__(self):
        if not self.a < self.b:
            raise ValidationError("window needs a < b")
        if self.samples < 16:
            raise ValidationError("window needs at least 16 samples")

    def points(self, bits: int) -> list:
        with workprec(bits):
            a, b = to_mpfr(self.a, bits), to_mpfr(self.b, bits)
            return [a + (b - a) * i / (self.samples - 1) for i in range(self.samples)]


@dataclass(frozen=True)
class QuadResult:
    value: HPComplex
    error: float
    panels: int


def _rule(fn, a, b, nodes) -> HPComplex:
    xs, ws = nodes
    half = (b - a) / 2
    mid = (a + b) / 2
    acc = mpc(0)
    for x, w in zip(xs, ws):
        acc += w * fn(mid + half * x)
    return acc * half


def integrate(g, f, window: Window, ctx: PrecisionContext = DEFAULT_CONTEXT, tol_bits: int | None = None) -> QuadResult:
    """Adaptive quadrature of g(u) e(f(u)) on the window.

    Panels start no wider than half a local phase period 1/|f'|; each panel
    compares 16- and 32-point Gauss-Legendre and is bisected until the
    difference is below its share of the tolerance 2^-(target/2).
    """
    tol_bits = ctx.target_bits // 2 if tol_bits is None else tol_bits
    bits = tol_bits + 48
    amp = amplitude(g)
    lo_rule, hi_rule = gauss_legendre(LOW, bits), gauss_legendre(HIGH, bits)
    with workprec(bits):
        a, b = to_mpfr(window.a, bits), to_mpfr(window.b, bits)
        length = b - a
        tol = gmpy2.mul_2exp(mpfr(1), -tol_bits)
        two_pi = 2 * gmpy2.const_pi()

        def fn(u):
            s, c = gmpy2.sin_cos(two_pi * f.value(u))
            return amp(u) * mpc(c, s)

        speed = max(abs(f.deriv(u)) for u in window.points(bits))
        pieces = max(1, math.ceil(float(2 * speed * length)))
        if pieces > MAX_PANELS:
            raise QuadratureNonConvergent(math.inf, float(tol))
        stack = [(a + length * i / pieces, a + length * (i + 1) / pieces) for i in range(pieces)]
        stack.reverse()
        total, err, panels = mpc(0), mpfr(0), 0
        while stack:
            lo, hi = stack.pop()
            q1 = _rule(fn, lo, hi, lo_rule)
            q2 = _rule(fn, lo, hi, hi_rule)
            e = abs(q2 - q1)
            share = tol * (hi - lo) / length
            if e <= share or panels + len(stack) > MAX_PANELS:
                if e > share:
                    raise QuadratureNonConvergent(float(e), float(share))
                total += q2
                err += e
                panels += 1
            else:
                mid = (lo + hi) / 2
                stack.append((mid, hi))
                stack.append((lo, mid))
        return QuadResult(total, float(err), panels)


def oscillatory_integral(g, f, window: Window, ctx: PrecisionContext = DEFAULT_CONTEXT) -> HPComplex:
    """integral of g(u) e(f(u)) over the window, absolute error <= 2^-(target/2)."""
    return integrate(g, f, window, ctx).value


# -- double precision composite rule, for the long h-sums of the EM probe --

def composite_nodes(a: float, b: float, panels: int, n: int = 8) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    edges = np.linspace(a, b, panels + 1)
    half = (edges[1:] - edges[:-1])[:, None] / 2
    mid = (edges[1:] + edges[:-1])[:, None] / 2
    return (mid + half * x).ravel(), (half * w).ravel()
