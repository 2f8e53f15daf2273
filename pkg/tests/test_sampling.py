import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condiff1d.problem import OverflowGuard, ProblemSpec, ZeroDrift
from condiff1d.sampling import exponential_rule, random_rule, uniform_rule

# frozen from mpmath (40 digits): Z = (2 eps/F)(1 - exp(-F/(2 eps)))
Z_ORACLE = {0.05: 0.099995460007023752,
            0.25: 0.43233235838169365,
            1.0: 0.78693868057473315}


class TestUniformRule:
    def test_single_midpoint(self):
        r = uniform_rule(1, 1.0)
        assert r.bulk_x.tolist() == [0.5]
        assert r.bulk_w.tolist() == [1.0]
        assert r.boundary_x.tolist() == [0.0, 1.0]
        assert r.boundary_w.tolist() == [1.0, 1.0]

    def test_midpoint_exact_for_linear(self):
        r = uniform_rule(10, 1.0)
        assert float(r.bulk_w @ r.bulk_x) == pytest.approx(0.5, abs=1e-15)

    def test_midpoint_quadratic_value(self):
        # frozen by direct summation: sum ((k+1/2)/10)^2 / 10 = 0.3325
        r = uniform_rule(10, 1.0)
        assert float(r.bulk_w @ r.bulk_x**2) == pytest.approx(0.3325, abs=1e-15)

    def test_rescaled_domain_weights(self):
        r = uniform_rule(8, 4.0)
        assert np.allclose(r.bulk_w, 0.5)
        assert float(np.sum(r.bulk_w)) == pytest.approx(4.0)
        assert r.boundary_x[1] == 4.0

    def test_error_decays_quadratically(self):
        exact = np.exp(1.0) - 1.0
        errs = []
        ks = [10, 100, 1000, 10_000]
        for k in ks:
            r = uniform_rule(k, 1.0)
            errs.append(abs(float(r.bulk_w @ np.exp(r.bulk_x)) - exact))
        slope = np.polyfit(np.log(ks), np.log(errs), 1)[0]
        assert abs(slope + 2.0) <= 0.3

    @settings(max_examples=30)
    @given(st.integers(1, 300), st.floats(0.1, 50.0),
           st.floats(-3.0, 3.0), st.floats(-3.0, 3.0))
    def test_exact_on_degree_one_polynomials(self, k, end, a, b):
        r = uniform_rule(k, end)
        quad = float(r.bulk_w @ (a * r.bulk_x + b))
        exact = a * end**2 / 2.0 + b * end
        assert quad == pytest.approx(exact, rel=1e-12, abs=1e-12)


class TestRandomRule:
    def test_deterministic_per_seed(self):
        a = random_rule(50, 1.0, seed=11)
        b = random_rule(50, 1.0, seed=11)
        assert np.array_equal(a.bulk_x, b.bulk_x)

    def test_seeds_differ(self):
        a = random_rule(50, 1.0, seed=1)
        b = random_rule(50, 1.0, seed=2)
        assert np.any(a.bulk_x != b.bulk_x)

    def test_single_point(self):
        r = random_rule(1, 1.0, seed=0)
        assert 0.0 < r.bulk_x[0] < 1.0
        assert r.bulk_w.tolist() == [1.0]

    def test_monte_carlo_mean_within_3_sigma(self):
        # integral of x over (0,1): MC standard error = 0.2887/sqrt(K)
        k = 10_000
        r = random_rule(k, 1.0, seed=42)
        est = float(r.bulk_w @ r.bulk_x)
        assert abs(est - 0.5) <= 3.0 * 0.2887 / np.sqrt(k)

    def test_points_inside_domain(self):
        r = random_rule(1000, 7.0, seed=5)
        assert np.all((r.bulk_x > 0.0) & (r.bulk_x < 7.0))


class TestExponentialRule:
    def test_normalizer_closed_form(self):
        for eps, z in Z_ORACLE.items():
            rule = exponential_rule(10, 10, ProblemSpec(epsilon=eps), seed=0)
            assert rule.z_norm == pytest.approx(z, rel=1e-14)

    def test_normalizer_matches_dense_quadrature(self):
        for eps in (0.05, 0.25, 1.0):
            rule = exponential_rule(2, 2, ProblemSpec(epsilon=eps), seed=0)
            x = np.linspace(0.0, 1.0, 1_000_001)
            quad = float(np.trapezoid(np.exp(-x / (2.0 * eps)), x))
            assert rule.z_norm == pytest.approx(quad, rel=1e-8)

    def test_part2_estimator_consistency(self):
        # sum of part-2 weights times 1 estimates int exp(-x/(2 eps)) dx = Z
        spec = ProblemSpec(epsilon=0.25)
        rule = exponential_rule(10, 100_000, spec, seed=3)
        est = float(np.sum(rule.bulk_w2))
        assert est == pytest.approx(rule.z_norm, rel=1e-12)  # weights are Z/K2
        # and the density integrates test functions correctly
        est_x = float(rule.bulk_w2 @ rule.bulk_x2)
        exact = 4 * 0.25**2 * (1.0 - 3.0 * np.exp(-2.0))  # int x e^(-2x) dx on (0,1)
        assert est_x == pytest.approx(exact, rel=0.02)

    def test_part2_unbiased_over_seeds(self):
        # nonconstant integrand: mean over 100 seeds within 3 standard errors
        spec = ProblemSpec(epsilon=0.25)
        exact = float(np.trapezoid(np.cos(np.linspace(0, 1, 200_001))
                               * np.exp(-2.0 * np.linspace(0, 1, 200_001)),
                               np.linspace(0, 1, 200_001)))
        estimates = []
        for seed in range(100):
            rule = exponential_rule(2, 1000, spec, seed=seed)
            estimates.append(float(rule.bulk_w2 @ np.cos(rule.bulk_x2)))
        mean = np.mean(estimates)
        stderr = np.std(estimates, ddof=1) / np.sqrt(len(estimates))
        assert abs(mean - exact) <= 3.0 * stderr

    def test_zero_drift_limit_is_uniform(self):
        # F -> 0: density tends to uniform; KS statistic below 0.02 at K2=1e4
        spec = ProblemSpec(epsilon=0.25, drift=1e-8)
        rule = exponential_rule(2, 10_000, spec, seed=1)
        xs = np.sort(rule.bulk_x2)
        n = len(xs)
        ks = np.max(np.abs(xs - (np.arange(1, n + 1) - 0.5) / n)) + 0.5 / n
        assert ks < 0.02

    def test_requires_nonzero_drift(self):
        with pytest.raises(ZeroDrift):
            exponential_rule(2, 2, ProblemSpec(epsilon=1.0, drift=0.0), seed=0)

    def test_overflow_guard(self):
        with pytest.raises(OverflowGuard):
            exponential_rule(2, 2, ProblemSpec(epsilon=5e-4), seed=0)

    def test_points_and_streams(self):
        rule = exponential_rule(100, 100, ProblemSpec(epsilon=0.25), seed=9)
        assert np.all((rule.bulk_x > 0) & (rule.bulk_x < 1))
        assert np.all((rule.bulk_x2 >= 0) & (rule.bulk_x2 <= 1))
        # part-1 and part-2 draws come from independent streams
        assert not np.array_equal(np.sort(rule.bulk_x), np.sort(rule.bulk_x2))


class TestValidation:
    def test_k_must_be_positive(self):
        with pytest.raises(ValueError):
            uniform_rule(0, 1.0)
        with pytest.raises(ValueError):
            random_rule(0, 1.0, seed=0)
        with pytest.raises(ValueError):
            exponential_rule(0, 5, ProblemSpec(epsilon=1.0), seed=0)
