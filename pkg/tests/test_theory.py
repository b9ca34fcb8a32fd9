import math

import numpy as np
import pytest

from moninc.oracle import BatchSchedule
from moninc.theory import (contraction_q, dominance_constant,
                           geometric_constant, noise_envelope_B, oracle_cost,
                           poly_rate_constant, tau_eps)


class TestContraction:
    # a = b = 1/2, lam = 1/4, mu = 1, abar = 0.1, Ltilde = 1:
    # rho = 16*2.5*0.81/(31*1.25), eta = 1/8
    EXAMPLE = dict(a=0.5, b=0.5, lam=0.25, mu=1.0, alpha_bar=0.1, L_tilde=1.0)

    def test_reference_value(self):
        q = contraction_q(**self.EXAMPLE)
        assert q == pytest.approx(0.895483870967742, rel=1e-15)

    def test_strictly_inside_unit_interval(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            a, b = rng.uniform(0.05, 0.95, 2)
            mu = rng.uniform(0.1, 10.0)
            L_tilde = rng.uniform(mu, mu + 10.0)
            abar = rng.uniform(0.0, 0.9)
            cap = min(a / (2 * mu), b * mu, (1 - a) / (2 * L_tilde))
            lam = rng.uniform(0.1, 1.0) * cap
            q = contraction_q(a, b, lam, mu, abar, L_tilde)
            assert 0.0 < q < 1.0

    def test_monotone_in_inertia_and_displacement_weights(self):
        base = contraction_q(**self.EXAMPLE)
        more_inertia = contraction_q(**{**self.EXAMPLE, "alpha_bar": 0.3})
        assert more_inertia > base
        more_b = contraction_q(**{**self.EXAMPLE, "b": 0.9,
                                  "lam": 0.25})        # cap still 0.25
        assert more_b > base

    def test_decreasing_in_step_size(self):
        qs = [contraction_q(0.5, 0.5, lam, 1.0, 0.1, 1.0)
              for lam in (0.05, 0.1, 0.2, 0.25)]
        assert all(x > y for x, y in zip(qs, qs[1:]))

    def test_step_cap_enforced(self):
        with pytest.raises(ValueError, match="admissible step"):
            contraction_q(0.5, 0.5, 0.26, 1.0, 0.1, 1.0)

    def test_parameter_ranges(self):
        with pytest.raises(ValueError):
            contraction_q(1.0, 0.5, 0.1, 1.0, 0.1, 1.0)
        with pytest.raises(ValueError):
            contraction_q(0.5, 0.5, 0.1, 1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            contraction_q(0.5, 0.5, -0.1, 1.0, 0.1, 1.0)


class TestNoiseEnvelope:
    def test_reference_value(self):
        assert noise_envelope_B(0.5, 0.5, 0.25, 1.0) == pytest.approx(0.625)

    def test_quadratic_in_noise_level(self):
        b1 = noise_envelope_B(1.0, 0.5, 0.1, 2.0)
        b3 = noise_envelope_B(3.0, 0.5, 0.1, 2.0)
        assert b3 == pytest.approx(9.0 * b1, rel=1e-14)
        assert noise_envelope_B(0.0, 0.5, 0.1, 2.0) == 0.0


class TestGeometricConstant:
    def test_noise_free_reduces_to_initial_distance_term(self):
        for p, q in ((0.5, 0.25), (0.9, 0.3), (0.1, 0.7)):
            assert geometric_constant(p, q, 1.0, 0.0, 0.0, 0.0) \
                == pytest.approx(2.0)

    def test_reference_value(self):
        assert geometric_constant(0.5, 0.25, 1.0, 0.0, 0.0, 1.0) \
            == pytest.approx(10.0)

    def test_symmetric_in_rate_pair(self):
        c1 = geometric_constant(0.5, 0.25, 1.3, 0.05, 0.1, 0.7)
        c2 = geometric_constant(0.25, 0.5, 1.3, 0.05, 0.1, 0.7)
        assert c1 == pytest.approx(c2, rel=1e-15)

    def test_equal_rates_demand_explicit_slack(self):
        with pytest.raises(ValueError, match="p_hat"):
            geometric_constant(0.5, 0.5, 1.0, 0.0, 0.0, 1.0)
        got = geometric_constant(0.5, 0.5, 1.0, 0.0, 0.0, 1.0, p_hat=0.75)
        want = 2.0 + 4.0 / (math.e * math.log(0.75 / 0.5))
        assert got == pytest.approx(want, rel=1e-15)
        with pytest.raises(ValueError):
            geometric_constant(0.5, 0.5, 1.0, 0.0, 0.0, 1.0, p_hat=0.4)

    def test_inertia_ordering_validated(self):
        with pytest.raises(ValueError):
            geometric_constant(0.5, 0.25, 1.0, 0.3, 0.1, 0.0)


class TestIterationComplexity:
    def test_reference_value(self):
        assert tau_eps(0.9, 0.5, 100.0, 1e-4) == 132
        assert tau_eps(0.5, 0.9, 100.0, 1e-4) == 132   # max{p,q} rules

    def test_clamped_at_one_when_already_accurate(self):
        assert tau_eps(0.9, 0.5, 1e-6, 1e-4) == 1

    def test_halving_eps_costs_a_fixed_increment(self):
        t1 = tau_eps(0.9, 0.5, 100.0, 1e-4)
        t2 = tau_eps(0.9, 0.5, 100.0, 5e-5)
        assert t2 - t1 in (6, 7)                       # ln 2 / ln(1/0.9)

    def test_equal_rates_default_slack(self):
        # p = q = 0.5 defaults the reporting rate to (p+1)/2 = 0.75
        assert tau_eps(0.5, 0.5, 100.0, 1e-4) == 49
        assert tau_eps(0.5, 0.5, 100.0, 1e-4, p_hat=0.9) == 132

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            tau_eps(0.9, 0.5, 100.0, 0.0)
        with pytest.raises(ValueError):
            tau_eps(0.9, 0.5, 0.0, 1e-4)
        with pytest.raises(ValueError):
            tau_eps(1.1, 0.5, 100.0, 1e-4)


class TestOracleCost:
    def test_reference_values(self):
        assert oracle_cost(BatchSchedule.constant(1), 100, 2) == 200
        assert oracle_cost(BatchSchedule.geometric(0.5), 3, 2) == 28
        assert oracle_cost(BatchSchedule.constant(2), 10, 1) == 20

    def test_matches_direct_sum_for_polynomial_growth(self):
        sched = BatchSchedule.polynomial(1.01)
        want = 2 * sum(int(k ** 1.01) for k in range(1, 51))
        assert oracle_cost(sched, 50, 2) == want

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            oracle_cost(BatchSchedule.constant(1), 0, 2)
        with pytest.raises(ValueError):
            oracle_cost(BatchSchedule.constant(1), 10, 3)


class TestPolynomialConstant:
    def test_reference_value(self):
        got = poly_rate_constant(0.5, 1.0, 1.0, 0.0, 0.0, 0.0)
        assert got == pytest.approx(30.311738018405507, rel=1e-13)

    def test_noise_term_is_additive(self):
        c0 = poly_rate_constant(0.5, 1.0, 1.0, 0.0, 0.0, 0.0)
        c1 = poly_rate_constant(0.5, 1.0, 1.0, 0.0, 0.0, 1.0)
        assert c1 - c0 == pytest.approx(4.0 / (0.5 * math.log(2.0)),
                                        rel=1e-13)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            poly_rate_constant(1.0, 1.0, 1.0, 0.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            poly_rate_constant(0.5, 0.0, 1.0, 0.0, 0.0, 0.0)


class TestDominance:
    def test_reference_value(self):
        assert dominance_constant(0.9, 0.5) \
            == pytest.approx(0.6258723838736684, rel=1e-15)

    def test_bound_holds_on_a_dense_grid(self):
        z = np.linspace(0.0, 1000.0, 200_001)
        for p, q in ((0.9, 0.5), (0.99, 0.9), (0.5, 0.1)):
            D = dominance_constant(p, q)
            with np.errstate(under="ignore"):
                lhs = z * q ** z
                rhs = D * p ** z
            assert np.all(lhs <= rhs * (1.0 + 1e-12))
            # the bound is tight: the grid supremum of z (q/p)^z reaches D
            ratio = z * (q / p) ** z
            assert ratio.max() == pytest.approx(D, rel=1e-4)

    def test_requires_ordered_rates(self):
        with pytest.raises(ValueError):
            dominance_constant(0.5, 0.9)
        with pytest.raises(ValueError):
            dominance_constant(0.9, 0.9)
