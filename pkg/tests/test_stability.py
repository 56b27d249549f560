import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fastmm.bilinear import classical_algorithm, multiply_stationary, strassen
from fastmm.errors import DimensionError
from fastmm.matrix import Matrix, random_matrix
from fastmm.stability import (CSV_HEADER, ErrorBoundReport, ExponentProblem, PrePostLevel,
                              classical_mu, epsilon_scaling, exponent_sum, growth_slope,
                              measure_error, mu_for_algorithm, mu_nonstationary, mu_stationary,
                              mu_stpp_exponent, omega_bound, random_inputs, runtime_exponent,
                              worst_case)


def strassen_mult(cutoff=1):
    alg = strassen()
    return lambda A, B: multiply_stationary(alg, A, B, cutoff, check=False)


class TestStationaryBound:
    def test_strassen_one_level(self):
        prof = strassen().profile
        theta = prof.theta0
        assert theta == 8
        assert mu_stationary(prof, 1, 1, 1, theta, 2, 2) == 8 * theta
        assert mu_for_algorithm(strassen(), 2) == 64

    def test_zero_depth(self):
        assert mu_stationary(strassen().profile, 3, 2, 5, 11, 2, 1) == 1

    def test_monotone_with_shrinking_ratio(self):
        # mu(k^m) = (1 + D m) c^m: the affine factor makes log mu concave in m,
        # so successive ratios decrease towards c = theta |U||V||W|
        prof = strassen().profile
        for theta in (1, 2, 8):
            mus = [mu_stationary(prof, 1, 1, 1, theta, 2, 2 ** m) for m in range(8)]
            assert all(a < b for a, b in zip(mus, mus[1:]))
            ratios = [b / a for a, b in zip(mus, mus[1:])]
            assert all(r1 >= r2 for r1, r2 in zip(ratios, ratios[1:]))
            assert all(r > theta for r in ratios)

    def test_needs_power_of_k(self):
        with pytest.raises(DimensionError):
            mu_stationary(strassen().profile, 1, 1, 1, 8, 2, 6)

    def test_classical_mu(self):
        assert classical_mu(4, "max-entry") == 16
        assert classical_mu(4, "frobenius") == 4


class TestNonstationaryBound:
    def test_hand_example(self):
        levels = [PrePostLevel(7, 1, 1, 1, 1), PrePostLevel(7, 1, 1, 1, 1)]
        assert mu_nonstationary(levels, 1) == 169
        assert mu_nonstationary(levels[1:], 1) == 22

    def test_identity_pre_post(self):
        assert mu_nonstationary([PrePostLevel(7)], 5.0) == 35.0

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.integers(1, 30), st.floats(0.1, 4), st.floats(0.1, 4)),
                    min_size=1, max_size=5), st.floats(0.5, 100))
    def test_homogeneous_product(self, params, base):
        levels = [PrePostLevel(t, pre, post) for t, pre, post in params]
        want = base * math.prod(t * post * pre * pre for t, pre, post in params)
        assert mu_nonstationary(levels, base) == pytest.approx(want, rel=1e-12)

    def test_empty(self):
        with pytest.raises(ValueError):
            mu_nonstationary([], 1)

    def test_negative(self):
        with pytest.raises(ValueError):
            PrePostLevel(7, -1)


class TestGroupExponents:
    def test_three_one(self):
        assert mu_stpp_exponent(3, 1) == 2.5
        assert runtime_exponent(3, 1) == 2.0
        assert exponent_sum(3, 1) == 4.5

    def test_four_one(self):
        assert (mu_stpp_exponent(4, 1), runtime_exponent(4, 1)) == (3.0, 3.0)

    @pytest.mark.parametrize("beta", [0.25, 0.5, 1, 2, 7])
    def test_boundary(self, beta):
        assert exponent_sum(2 * beta + 1, beta) == pytest.approx(3 + 3 / (2 * beta))

    def test_beta_positive(self):
        with pytest.raises(ValueError):
            mu_stpp_exponent(1, 0)


class TestOmega:
    def test_strassen(self):
        assert omega_bound(ExponentProblem([(2, 2, 2)], rank=7)).value == pytest.approx(
            math.log2(7), abs=1e-9)

    @pytest.mark.parametrize("h", [2, 3, 5])
    def test_classical_rank(self, h):
        assert omega_bound(ExponentProblem([(h, h, h)], rank=h ** 3)).value == pytest.approx(3, abs=1e-9)

    def test_two_copies_closed_form(self):
        res = omega_bound(ExponentProblem([(2, 2, 2), (2, 2, 2)], rank=14))
        assert res.value == pytest.approx(3 * math.log(14 / 2, 8), abs=1e-9)

    def test_irrep_right_hand_side(self):
        # a single triple against one irrep of dimension 8 forces 8^(w/3) * ... = 8^w
        res = omega_bound(ExponentProblem([(4, 4, 4)], irrep_dims=[2, 2, 2, 2]))
        # 64^(w/3) = 4 * 2^w  <=>  4^w = 4 * 2^w  <=>  2^w = 4
        assert res.value == pytest.approx(2.0, abs=1e-9)

    def test_clamped(self):
        assert omega_bound(ExponentProblem([(2, 2, 2)], rank=9)).status == "clamped-high"
        assert omega_bound(ExponentProblem([(2, 2, 2)], rank=3)).status == "clamped-low"

    def test_nondecreasing_in_rank(self):
        ranks = np.linspace(4, 8, 20)
        values = [omega_bound(ExponentProblem([(2, 2, 2)], rank=r)).value for r in ranks]
        assert all(a <= b for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("bad", [[(0, 2, 2)], [], [(2, 2)]])
    def test_degenerate(self, bad):
        with pytest.raises(ValueError):
            ExponentProblem(bad, rank=7)


class TestHarness:
    def test_exact_multiplier_has_zero_error(self, rng):
        A, B = random_inputs(rng, 4)
        rep = measure_error(strassen_mult(), A, B, None)
        assert rep.measured_error == 0 and rep.epsilon == 0 and rep.passed

    def test_classical_p53(self, rng):
        reports = []
        for _ in range(50):
            A, B = random_inputs(rng, 4)
            reports.append(measure_error(lambda x, y: x @ y, A, B, 53, mu=classical_mu(4),
                                         slack=0.1))
            # the tighter n-scaled bound also holds on uniform inputs
            r = reports[-1]
            assert r.measured_error <= 4 * r.epsilon * r.norm_a * r.norm_b * 1.1
        assert worst_case(reports).passed

    def test_reference_is_exact(self):
        # 1 + 2^-30 is lost at 24 bits; the exact reference keeps it
        A2 = Matrix.from_array(np.array([[1.0, 2.0 ** -30], [0, 0]]))
        B2 = Matrix.from_array(np.array([[1.0, 0], [1.0, 0]]))
        rep = measure_error(lambda x, y: x @ y, A2, B2, 24)
        assert rep.measured_error == 2.0 ** -30

    @pytest.mark.parametrize("n", [4, 8, 16])
    def test_strassen_within_bound(self, rng, n):
        mu = mu_for_algorithm(strassen(), n)
        for _ in range(10):
            A, B = random_inputs(rng, n)
            rep = measure_error(strassen_mult(), A, B, 24, mu=mu, theta=8, slack=0.1,
                                algorithm="strassen")
            assert rep.passed

    def test_complex_inputs(self, rng):
        A, B = random_inputs(rng, 4, complex_values=True)
        rep = measure_error(strassen_mult(), A, B, 30, mu=mu_for_algorithm(strassen(), 4))
        assert 0 < rep.measured_error and rep.passed

    def test_epsilon_scaling(self):
        res = epsilon_scaling(lambda x, y: x @ y, 8, 53, 24, instances=20, seed=3)
        assert res.consistent()
        res = epsilon_scaling(strassen_mult(), 8, 24, 12, instances=20, seed=3)
        assert res.consistent()

    def test_coarse_precision_monotonicity(self, rng):
        for _ in range(10):
            A, B = random_inputs(rng, 8)
            hi = measure_error(strassen_mult(), A, B, 30).measured_error
            lo = measure_error(strassen_mult(), A, B, 20).measured_error
            assert hi <= lo * 2 ** 10 * 1.5

    def test_report_row(self):
        rep = ErrorBoundReport(4, "strassen", "max-entry", 24, 2.0 ** -24, 1e-6, 1, 1, 960, 8, 0.1)
        row = rep.as_row()
        assert len(row) == len(CSV_HEADER)
        assert row[-1] == "true"
        assert "PASS" in rep.describe()

    def test_failure_recorded(self):
        rep = ErrorBoundReport(4, "x", "max-entry", 24, 2.0 ** -24, 1.0, 1, 1, 1, None)
        assert not rep.passed and "FAIL" in rep.describe()

    def test_growth_slope_advisory(self):
        fit = growth_slope([4, 8, 16, 32], [4 * 3.4 ** m for m in range(4)])
        assert fit.slope == pytest.approx(math.log2(3.4))
        assert fit.within_limit

    def test_shape_checked(self, rng):
        with pytest.raises(ValueError):
            measure_error(strassen_mult(), random_matrix(rng, 2, 3, "float"),
                          random_matrix(rng, 3, 2, "float"), 24)
