import math
import random

import gmpy2
import mpmath
import pytest
from gmpy2 import mpc, mpfr
from hypothesis import given
from hypothesis import strategies as st

from zpl.errors import PoleAtOne, PoleError
from zpl.hp import DEFAULT_CONTEXT, PrecisionContext, workprec
from zpl.zeta import (
    chi,
    complex_powers,
    gamma,
    loggamma,
    unit_powers,
    zeta,
    zeta_plan,
    zeta_via_functional,
)

CTX = DEFAULT_CONTEXT
BITS = 200


@pytest.fixture(autouse=True)
def _mpmath_precision():
    with mpmath.workprec(260):
        yield


def _mp(z):
    """Exact transfer of an mpc into mpmath."""
    re, im = (mpmath.mpf(int(p)) / int(q) for p, q in (z.real.as_integer_ratio(), z.imag.as_integer_ratio()))
    return mpmath.mpc(re, im)


def test_classical_values():
    with workprec(BITS):
        pi = gmpy2.const_pi()
        assert abs(zeta(2) - pi**2 / 6) <= CTX.budget()
        assert abs(zeta(4) - pi**4 / 90) <= CTX.budget()
        assert abs(zeta(0) + mpfr(1) / 2) <= CTX.budget()
        assert abs(zeta(-1) + mpfr(1) / 12) <= CTX.budget()


@pytest.mark.parametrize("m", range(1, 7))
def test_trivial_zeros(m):
    assert abs(zeta(-2 * m)) <= CTX.budget(4)


def test_zeta_minus_one_matches_bernoulli():
    from zpl.bernoulli import bernoulli_number

    for n in range(1, 8):
        expected = -bernoulli_number(n + 1) / (n + 1)
        with workprec(BITS):
            assert abs(zeta(-n) - mpfr(expected.numerator) / expected.denominator) <= CTX.budget()


def test_pole():
    with pytest.raises(PoleAtOne):
        zeta(1)


@pytest.mark.parametrize(
    "s",
    [complex(0.5, 14.134725), complex(-3, 1000), complex(-1, 9065.8), complex(2, -50), complex(-0.25, 77777)],
)
def test_against_mpmath(s):
    ours = zeta(mpc(s, 200))
    ref = mpmath.zeta(mpmath.mpc(s.real, s.imag))
    assert abs(_mp(ours) - ref) <= 2**-126


@given(
    st.floats(min_value=-4, max_value=0, allow_nan=False),
    st.floats(min_value=1, max_value=10**5, allow_nan=False),
    st.booleans(),
)
def test_functional_equation_oracle(sigma, t, flip):
    s = mpc(sigma, -t if flip else t, 200)
    a = zeta(s)
    b = zeta_via_functional(s)
    with workprec(BITS):
        assert abs(a - b) <= CTX.budget(8)


@given(st.floats(min_value=-6, max_value=6, allow_nan=False), st.floats(min_value=0.5, max_value=500, allow_nan=False))
def test_chi_reflection_identity(sigma, t):
    s = mpc(sigma, t, 200)
    with workprec(BITS):
        product = chi(s) * chi(1 - s)
        assert abs(product - 1) <= CTX.budget(16)


def test_chi_examples():
    with workprec(BITS):
        assert abs(chi(mpfr(1) / 2) - 1) <= CTX.budget()
        c = chi(mpc(0, 100))
        expected = math.sqrt(100 / (2 * math.pi))
        assert abs(abs(c) / expected - 1) < 2 / 100
    with pytest.raises(PoleError):
        chi(3)


@given(st.floats(min_value=-30, max_value=30, allow_nan=False), st.floats(min_value=-300, max_value=300, allow_nan=False))
def test_gamma_against_mpmath(x, y):
    if y == 0 and x <= 0 and float(x).is_integer():
        return
    if abs(complex(x, y)) < 1e-3:
        return
    ours = gamma(mpc(x, y, 200), 160)
    ref = mpmath.gamma(mpmath.mpc(x, y))
    assert abs(_mp(ours) - ref) <= abs(ref) * 2**-150


def test_loggamma_principal_branch():
    z = mpc(3, 1000)
    ours = loggamma(z, 160)
    ref = mpmath.loggamma(mpmath.mpc(3, 1000))
    assert abs(_mp(ours) - ref) <= 2**-150


def test_multiplicative_tables():
    with workprec(120):
        t = mpfr("123.456")
        table = unit_powers(t, 200)
        for m in (1, 2, 12, 97, 128, 199, 200):
            direct = gmpy2.exp(mpc(0, -t) * gmpy2.log(mpfr(m)))
            assert abs(table[m] - direct) < 2**-110
        s = mpc(mpfr("-2.5"), mpfr("40.0"))
        table = complex_powers(s, 100)
        for m in (6, 64, 81, 99):
            assert abs(table[m] - gmpy2.exp(-s * gmpy2.log(mpfr(m)))) < 2**-100 * abs(table[m])


def test_plan_grows_with_height():
    low = zeta_plan(-1, 100.0, CTX)
    high = zeta_plan(-1, 1e5, CTX)
    assert high.M > low.M >= 32
    assert high.M >= math.ceil(1e5 / math.pi)


def test_lower_precision_context():
    ctx = PrecisionContext(target_bits=64)
    with workprec(100):
        assert abs(zeta(2, ctx) - gmpy2.const_pi() ** 2 / 6) <= ctx.budget()


def test_random_sample_is_reproducible():
    rng = random.Random(7)
    s = mpc(-rng.uniform(0, 4), rng.uniform(1, 1e5), 200)
    assert zeta(s) == zeta(s)
