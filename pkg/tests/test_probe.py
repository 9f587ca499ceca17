import cmath
import math
import random
from fractions import Fraction

import gmpy2
import pytest
from gmpy2 import mpfr

from zpl.errors import HypothesisUnverified, ValidationError
from zpl.hp import DEFAULT_CONTEXT, e_unit, workprec
from zpl.probe import (
    C_AUDIT,
    PhaseSpec,
    derivative_test_audit,
    em_step_residual,
    phase_values,
    stationary_phase_check,
    step1_residual,
    step1_sides,
    window_defaults,
)
from zpl.quad import LinearPhase, Window
from zpl.sums import SumParams

CTX = DEFAULT_CONTEXT
BITS = CTX.working_bits()
D = SumParams.base(1, 2, 1, 2).d  # 1/log 2


def test_phase_identities_on_random_specs():
    rng = random.Random(2024)
    for _ in range(1000):
        spec = PhaseSpec(
            rng.randint(1, 50),
            Fraction(rng.randint(1, 4000), 1000),
            Fraction(rng.randint(-3000, 3000), 1000),
            rng.randint(-8, 8),
        )
        u = Fraction(rng.randint(1, 10**6), 1000)
        F, F1, F2, xi = phase_values(spec, mpfr(u.numerator, BITS) / u.denominator)
        with workprec(BITS):
            d = mpfr(spec.d.numerator) / spec.d.denominator
            Fx, F1x, F2x, _ = phase_values(spec, xi)
            scale = 1 + abs(Fx) + abs(spec.h * xi)
            assert abs(F1x - spec.h) <= CTX.budget(4) * (1 + abs(spec.h))
            assert abs(Fx - spec.h * xi - d * xi) <= CTX.budget(6) * scale
            assert abs(F2x + d / xi) <= CTX.budget(2) * abs(d / xi)


def test_phase_closed_forms():
    spec = PhaseSpec(3, Fraction(1, 2), Fraction(1, 4), 1)
    F, F1, F2, xi = phase_values(spec, 2)
    with workprec(BITS):
        assert abs(F - (gmpy2.log(mpfr(3)) + 1 + mpfr(1) / 2)) <= CTX.budget(2)
        assert abs(F1 - (gmpy2.log(mpfr(3)) / 2 + mpfr(1) / 4)) <= CTX.budget(2)
        assert F2 == mpfr(-1) / 4
        assert abs(xi - 6 * gmpy2.exp(mpfr(-3) / 2)) <= CTX.budget(4)


def test_phase_validation():
    with pytest.raises(ValidationError):
        PhaseSpec(0, 1, 0)
    with pytest.raises(ValidationError):
        PhaseSpec(1, 0, 0)
    with pytest.raises(ValidationError):
        phase_values(PhaseSpec(1, 1, 0), 0)


def test_window_defaults():
    w = window_defaults(1000)
    L = math.log(1000)
    assert w["M"] == 4000
    assert w["X"] == math.ceil(L ** (4 / 3) * math.log(L) ** (-20 / 9))
    assert w["V"] == pytest.approx(L ** (-1 / 3) * math.log(L) ** (5 / 9))
    assert w["H"] == pytest.approx(8 * math.log(4000 * 1000) ** 2)


@pytest.mark.parametrize("m, h", [(9, -4), (11, -7), (1, -2), (5, 0)])
def test_stationary_main_term(m, h):
    spec = PhaseSpec(m, D, 0, h)
    r = stationary_phase_check(spec, Fraction(1, 4))
    with workprec(BITS):
        d = D.at(BITS)
        assert abs(abs(r.main_term) - 1 / gmpy2.sqrt(d)) <= CTX.budget(8)
        expected = e_unit(m * gmpy2.exp(-h / d) - mpfr(1) / 8, BITS) / gmpy2.sqrt(d)
        assert abs(r.main_term - expected) <= CTX.budget(16) * (1 + abs(m * gmpy2.exp(-h / d)))
    if r.xi > 50:
        assert r.residual < 0.05


def test_stationary_residual_decays_with_xi():
    small = stationary_phase_check(PhaseSpec(9, D, 0, -4), Fraction(1, 4))
    large = stationary_phase_check(PhaseSpec(11, D, 0, -7), Fraction(1, 4))
    assert 90 < small.xi < 110 and 900 < large.xi < 1100
    assert large.residual < small.residual


def test_stationary_validation():
    spec = PhaseSpec(2, D, 0, -1)
    for U in (0, Fraction(3, 4), -1):
        with pytest.raises(ValidationError):
            stationary_phase_check(spec, U)


def test_audit_linear_phase():
    r = derivative_test_audit("first", "one", LinearPhase(5), Window(0, 1))
    assert r.integral_abs < 1e-30
    with workprec(BITS):
        assert abs(r.bound - mpfr(1) / 5) <= CTX.budget()
    assert not r.violation


def test_audit_first_test_left_of_stationary_point():
    spec = PhaseSpec(3, D, 0, -4)  # xi ~ 69
    r = derivative_test_audit("first", "inv_sqrt", spec, Window(120, 200))
    assert not r.violation
    assert r.integral_abs <= C_AUDIT * r.bound


def test_audit_second_test_around_stationary_point():
    spec = PhaseSpec(9, D, 0, -4)
    with workprec(BITS):
        xi = spec.xi()
        a, b = 0.75 * xi, 1.25 * xi
        r_min = D.at(BITS) / b
    r = derivative_test_audit("second", "inv_sqrt", spec, Window(a, b))
    assert not r.violation
    with workprec(BITS):
        assert abs(r.bound - (1 / gmpy2.sqrt(a)) / gmpy2.sqrt(r_min)) <= 1e-20


def test_audit_hypotheses_are_checked():
    spec = PhaseSpec(9, D, 0, -4)
    with workprec(BITS):
        xi = spec.xi()
        a, b = 0.5 * xi, 1.5 * xi
    with pytest.raises(HypothesisUnverified):
        derivative_test_audit("first", "inv_sqrt", spec, Window(a, b))
    with pytest.raises(ValidationError):
        derivative_test_audit("third", "inv_sqrt", spec, Window(a, b))


def _step1_lhs_oracle(N):
    """sum_{n<=N} zeta(2 pi i n/log 2)/n with zeta from an independent library."""
    mpmath = pytest.importorskip("mpmath")
    with mpmath.workprec(80):
        tau = 2 * mpmath.pi / mpmath.log(2)
        return complex(sum(mpmath.zeta(mpmath.mpc(0, tau * n)) / n for n in range(1, N + 1)))


def test_step1_sides():
    lhs, rhs = step1_sides(0, D, 0, 20, 80)
    assert abs(lhs - _step1_lhs_oracle(20)) < 1e-12
    # right side from a direct double loop
    d = 1 / math.log(2)
    direct = 0j
    for m in range(1, 81):
        for n in range(1, 21):
            F = d * n * math.log(m * math.e / (d * n))
            direct += cmath.exp(2j * math.pi * F) / math.sqrt(n) / m
    direct *= cmath.exp(2j * math.pi / 8) * math.sqrt(d)
    assert abs(rhs - direct) < 1e-9


def test_step1_residual_example():
    r = step1_residual(0, D, 0, 50, 200)
    assert math.isfinite(r)
    assert 0.01 < r < 0.1


def test_step1_validation():
    with pytest.raises(ValidationError):
        step1_residual(0, D, 0, 50, 60)
    with pytest.raises(ValidationError):
        step1_residual(0, D, 0, 600, 2400)
    with pytest.raises(ValidationError):
        step1_residual(Fraction(1, 2), D, 0, 10, 40)


def test_em_step_below_tail_estimate():
    r = em_step_residual(3, 50, D, 0, 400)
    assert r.residual < r.tail_estimate
    small = em_step_residual(1, 10, D, 0, 1000)
    assert small.residual < small.tail_estimate


def test_em_step_halves_when_cutoff_doubles():
    res = [em_step_residual(3, 50, D, 0, H).residual for H in (400, 800, 1600)]
    assert res[1] / res[0] <= 0.51 and res[2] / res[1] <= 0.51


def test_em_step_lhs():
    r = em_step_residual(2, 30, Fraction(3, 2), Fraction(1, 3), 50)
    direct = 0j
    for n in range(1, 31):
        F = 1.5 * n * math.log(2 * math.e / (1.5 * n)) + n / 3
        direct += cmath.exp(2j * math.pi * F) / math.sqrt(n)
    assert abs(r.lhs - direct) < 1e-12


def test_em_step_validation():
    with pytest.raises(ValidationError):
        em_step_residual(3, 300, D, 0, 100)
    with pytest.raises(ValidationError):
        em_step_residual(0, 30, D, 0, 100)
