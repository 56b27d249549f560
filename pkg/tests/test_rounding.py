import math
from fractions import Fraction

import gmpy2
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fastmm.rounding import RoundedScalar, RoundingContext, round_to_bits, with_rounding

finite = st.floats(min_value=-1e30, max_value=1e30, allow_nan=False, allow_infinity=False)
bits = st.integers(min_value=2, max_value=53)


def mpfr_op(op, a, b, p):
    ctx = gmpy2.context(precision=p, round=gmpy2.RoundToNearest, emax=2 ** 20, emin=-2 ** 20,
                        subnormalize=False)
    with gmpy2.context(ctx):
        x, y = gmpy2.mpfr(a, 53), gmpy2.mpfr(b, 53)
        r = {"add": x + y, "sub": x - y, "mul": x * y, "div": x / y}[op]
        return float(r)


def test_sum_of_tenths_matches_binary64():
    assert with_rounding(RoundingContext(53), lambda x, y: x + y, 0.1, 0.2) == 0.30000000000000004


@pytest.mark.parametrize("p", [3, 8, 24, 53])
def test_representable_operations_are_exact(p):
    ctx = RoundingContext(p)
    assert with_rounding(ctx, lambda x, y: x + y, 1.0, 1.0) == 2.0
    assert with_rounding(ctx, lambda x, y: x * y, 2.0, 3.0) == 6.0


def test_small_increment_vanishes_at_eight_bits():
    assert with_rounding(RoundingContext(8), lambda x, y: x + y, 1.0, 2.0 ** -9) == 1.0
    # the increment survives once it reaches half an ulp on an odd significand
    assert with_rounding(RoundingContext(8), lambda x, y: x + y, 1.0 + 2.0 ** -7, 2.0 ** -8) == 1.0 + 2.0 ** -6


def test_ties_round_to_even():
    assert round_to_bits(np.float64(1 + 2.0 ** -8), 8) == 1.0
    assert round_to_bits(np.float64(1 + 3 * 2.0 ** -8), 8) == 1 + 2.0 ** -6


@pytest.mark.parametrize("p", [1, 54, 2.5])
def test_context_rejects_bad_precision(p):
    with pytest.raises(ValueError):
        RoundingContext(p)


def test_epsilon():
    assert RoundingContext(24).epsilon == 2.0 ** -24
    assert RoundingContext(2).epsilon == 0.25


@settings(max_examples=400, deadline=None)
@given(finite, finite, bits, st.sampled_from(["add", "sub", "mul"]))
def test_operations_round_once_like_mpfr(a, b, p, op):
    got = float(getattr(RoundingContext(p), op)(a, b))
    want = mpfr_op(op, a, b, p)
    assert got == want or (got == 0 and want == 0)


@settings(max_examples=200, deadline=None)
@given(finite, finite.filter(lambda x: abs(x) > 1e-30), bits)
def test_division_rounds_once_like_mpfr(a, b, p):
    assert float(RoundingContext(p).div(a, b)) == mpfr_op("div", a, b, p)


@settings(max_examples=300, deadline=None)
@given(finite, finite, st.sampled_from(["add", "sub", "mul"]))
def test_p53_is_binary64(a, b, op):
    native = {"add": a + b, "sub": a - b, "mul": a * b}[op]
    got = float(getattr(RoundingContext(53), op)(a, b))
    assert got == native or (math.isnan(got) and math.isnan(native))


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=1e-100, max_value=1e6),
       st.floats(min_value=1e-100, max_value=1e6) | st.floats(min_value=-1e6, max_value=-1e-100),
       st.integers(min_value=2, max_value=40))
def test_relative_error_bounded_by_epsilon(a, b, p):
    # inputs keep the product clear of the subnormal range
    ctx = RoundingContext(p)
    exact = Fraction(a) * Fraction(b)
    got = Fraction(float(ctx.mul(a, b)))
    assert abs(got - exact) <= abs(exact) * Fraction(2) ** -p


def test_complex_parts_round_independently():
    ctx = RoundingContext(8)
    z = ctx.add(1 + 1j, 2.0 ** -9 + 2.0 ** -5 * 1j)
    assert z.real == 1.0
    assert z.imag == 1 + 2.0 ** -5


def test_rounded_scalar_arithmetic():
    ctx = RoundingContext(8)
    x = RoundedScalar(1.0, ctx)
    y = x + 2.0 ** -9
    assert float(y) == 1.0
    assert float(x * 3 - 1) == 2.0
    assert float(-x) == -1.0
