from fractions import Fraction

import gmpy2
import numpy as np
import pytest
from gmpy2 import mpc, mpfr
from hypothesis import given, settings
from hypothesis import strategies as st

from zpl.errors import QuadratureNonConvergent, ValidationError
from zpl.hp import DEFAULT_CONTEXT, PrecisionContext, e_unit, workprec
from zpl.probe import PhaseSpec
from zpl.quad import LinearPhase, Window, composite_nodes, gauss_legendre, integrate, oscillatory_integral
from zpl.sums import SumParams

CTX = DEFAULT_CONTEXT
TOL = 2.0 ** -(CTX.target_bits // 2)
D = SumParams.base(1, 2, 1, 2).d


@pytest.mark.parametrize("n", [4, 16, 32])
def test_gauss_legendre_is_exact_on_polynomials(n):
    xs, ws = gauss_legendre(n, 200)
    with workprec(200):
        for deg in (0, 1, 2 * n - 2, 2 * n - 1):
            total = sum(w * x**deg for x, w in zip(xs, ws))
            expected = 0 if deg % 2 else mpfr(2) / (deg + 1)
            assert abs(total - expected) < 2**-180


def test_constant_integrand():
    v = oscillatory_integral("one", LinearPhase(0), Window(0, 1))
    with workprec(200):
        assert abs(v - 1) <= TOL


@pytest.mark.parametrize("h", [1, -3, 17, 250])
def test_full_periods_vanish(h):
    v = oscillatory_integral("one", LinearPhase(h), Window(0, 1))
    with workprec(200):
        assert abs(v) <= TOL


@settings(max_examples=15)
@given(
    st.fractions(min_value=Fraction(1, 8), max_value=40, max_denominator=64),
    st.fractions(min_value=0, max_value=5, max_denominator=16),
    st.fractions(min_value=Fraction(1, 4), max_value=5, max_denominator=16),
)
def test_linear_phase_closed_form(c, a, length):
    b = a + length
    v = oscillatory_integral("one", LinearPhase(c), Window(a, b))
    bits = CTX.working_bits()
    with workprec(bits):
        two_pi_i = mpc(0, 2 * gmpy2.const_pi())
        expected = (e_unit(c * b, bits) - e_unit(c * a, bits)) / (two_pi_i * mpfr(c.numerator) / c.denominator)
        assert abs(v - expected) <= TOL


def test_additive_over_window_splits():
    spec = PhaseSpec(3, D, 0, -4)
    with workprec(CTX.working_bits()):
        xi = spec.xi()
        a, m, b = 0.75 * xi, xi, 1.25 * xi
    whole = integrate("inv_sqrt", spec, Window(a, b))
    left = integrate("inv_sqrt", spec, Window(a, m))
    right = integrate("inv_sqrt", spec, Window(m, b))
    with workprec(200):
        gap = abs(whole.value - left.value - right.value)
    assert gap <= whole.error + left.error + right.error + 3 * TOL


def test_stationary_window_agrees_with_higher_precision():
    spec = PhaseSpec(2, D, 0, -3)
    with workprec(CTX.working_bits()):
        xi = spec.xi()
    win = Window(0.75 * xi, 1.25 * xi)
    low = integrate("inv_sqrt", spec, win)
    high = integrate("inv_sqrt", spec, win, PrecisionContext(target_bits=256, max_working_bits=2048))
    with workprec(300):
        assert abs(low.value - high.value) <= low.error + TOL


def test_refuses_too_many_panels():
    with pytest.raises(QuadratureNonConvergent) as info:
        integrate("one", LinearPhase(10**6), Window(0, 1))
    assert info.value.achieved == float("inf")


def test_window_validation():
    with pytest.raises(ValidationError):
        Window(1, 1)
    with pytest.raises(ValidationError):
        Window(0, 1, samples=8)
    with pytest.raises(ValidationError):
        integrate("cubic", LinearPhase(1), Window(0, 1))


def test_composite_nodes():
    x, w = composite_nodes(0.0, 2.0, 5)
    assert np.isclose((w * x**3).sum(), 4.0, rtol=0, atol=1e-13)
    assert np.isclose(w.sum(), 2.0, rtol=0, atol=1e-14)
