"""Error-kernel draws: quantiles, moments, determinism, correlation map."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rumsim.distributions import (DrawMatrix, ErrorDistribution, correlate,
                                  exponential, gumbel, normal, pareto,
                                  quantile, sample)
from rumsim.errors import ConfigError, ShapeError

EULER_MASCHERONI = 0.5772156649015329


class TestQuantile:
    def test_gumbel_at_inverse_e(self):
        # -ln(-ln(e^-1)) = -ln(1) = 0
        assert quantile(gumbel(), math.exp(-1)) == pytest.approx(0.0, abs=1e-14)

    def test_pareto_lower_support_bound(self):
        # support starts at the scale parameter
        assert quantile(pareto(scale=1.0, shape=1.0), 1e-14) == pytest.approx(1.0, rel=1e-9)

    def test_exponential_unit_point(self):
        # solve 1 - exp(-x) = u at u = 1 - e^-1  ->  x = 1
        assert quantile(exponential(rate=1.0), 1.0 - math.exp(-1)) == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("u", [0.0, 1.0, -0.3, 1.7])
    def test_domain_error(self, u):
        with pytest.raises(ConfigError):
            quantile(gumbel(), u)

    @pytest.mark.parametrize("dist", [gumbel(), normal(), exponential(), pareto()])
    def test_strictly_increasing(self, dist):
        u = np.linspace(1e-6, 1.0 - 1e-6, 500)
        vals = quantile(dist, u)
        assert np.all(np.diff(vals) > 0)

    def test_normal_quantile_matches_moments(self):
        assert quantile(normal(2.0, 3.0), 0.5) == pytest.approx(2.0, abs=1e-12)


class TestSample:
    def test_normal_moments_large_sample(self):
        draws = sample(normal(), 10 ** 6, 1, seed=101).values
        assert abs(draws.mean()) < 0.005
        assert abs(draws.var() - 1.0) < 0.01

    def test_gumbel_variance_large_sample(self):
        draws = sample(gumbel(), 10 ** 6, 1, seed=102).values
        assert abs(draws.var() - math.pi ** 2 / 6.0) < 0.02

    def test_gumbel_mean_is_euler_mascheroni(self):
        draws = sample(gumbel(), 10 ** 6, 1, seed=103).values
        assert abs(draws.mean() - EULER_MASCHERONI) < 0.01

    def test_exponential_mean_large_sample(self):
        draws = sample(exponential(rate=1.0), 10 ** 6, 1, seed=104).values
        assert abs(draws.mean() - 1.0) < 0.005

    def test_normal_skewness_near_zero(self):
        draws = sample(normal(), 10 ** 6, 1, seed=105).values.ravel()
        centered = draws - draws.mean()
        skew = np.mean(centered ** 3) / np.mean(centered ** 2) ** 1.5
        assert abs(skew) < 0.02

    def test_determinism_bit_identical(self):
        a = sample(gumbel(), 200, 3, seed=7)
        b = sample(gumbel(), 200, 3, seed=7)
        assert np.array_equal(a.values, b.values)

    def test_seed_changes_draws(self):
        a = sample(gumbel(), 50, 2, seed=1).values
        b = sample(gumbel(), 50, 2, seed=2).values
        assert not np.array_equal(a, b)

    def test_pareto_heavy_tail_stays_on_support(self):
        draws = sample(pareto(), 10 ** 5, 1, seed=106).values
        assert np.all(draws >= 1.0)
        assert np.all(np.isfinite(draws))

    def test_shape_validation(self):
        with pytest.raises(ConfigError):
            sample(gumbel(), 0, 1, seed=0)
        with pytest.raises(ConfigError):
            sample(gumbel(), 1, 0, seed=0)


class TestCorrelate:
    def test_identity_is_noop(self):
        draws = sample(normal(), 100, 2, seed=8)
        out = correlate(draws, np.eye(2))
        assert np.array_equal(out.values, draws.values)

    def test_single_column_identity(self):
        draws = sample(normal(), 100, 1, seed=9)
        out = correlate(draws, np.array([[1.0]]))
        assert np.array_equal(out.values, draws.values)

    def test_imposed_correlation(self):
        # rows e -> L e with unit-norm second row gives corr = 0.4
        low = np.array([[1.0, 0.0], [0.4, math.sqrt(1 - 0.16)]])
        draws = sample(normal(), 10 ** 6, 2, seed=10)
        mixed = correlate(draws, low).values
        corr = np.corrcoef(mixed.T)[0, 1]
        assert abs(corr - 0.4) < 0.01

    def test_linearity(self):
        low = np.array([[1.0, 0.0], [0.3, 0.6]])
        x = sample(normal(), 64, 2, seed=11)
        y = sample(normal(), 64, 2, seed=12)
        combo = DrawMatrix(2.0 * x.values + 3.0 * y.values, seed=0, distribution=normal())
        lhs = correlate(combo, low).values
        rhs = 2.0 * correlate(x, low).values + 3.0 * correlate(y, low).values
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_shape_preserved(self):
        draws = sample(normal(), 33, 2, seed=13)
        assert correlate(draws, np.eye(2)).values.shape == (33, 2)

    def test_dimension_mismatch(self):
        draws = sample(normal(), 10, 3, seed=14)
        with pytest.raises(ShapeError):
            correlate(draws, np.eye(2))

    def test_not_lower_triangular(self):
        draws = sample(normal(), 10, 2, seed=15)
        with pytest.raises(ShapeError):
            correlate(draws, np.array([[1.0, 0.5], [0.0, 1.0]]))


class TestErrorDistribution:
    def test_defaults(self):
        assert gumbel().params == {"location": 0.0, "scale": 1.0}
        assert normal().params == {"mean": 0.0, "std": 1.0}
        assert exponential().params == {"rate": 1.0}
        assert pareto().params == {"scale": 1.0, "shape": 1.0}

    @pytest.mark.parametrize("kind,params", [
        ("gumbel", {"scale": 0.0}),
        ("normal", {"std": -1.0}),
        ("exponential", {"rate": 0.0}),
        ("pareto", {"shape": -2.0}),
    ])
    def test_positivity_enforced(self, kind, params):
        with pytest.raises(ConfigError):
            ErrorDistribution(kind, params)

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            ErrorDistribution("weibull")

    def test_config_round_trip(self):
        dist = pareto(scale=2.0, shape=1.5)
        again = ErrorDistribution.from_config(dist.to_config())
        assert again == dist


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2 ** 32), q=st.integers(1, 40),
       d=st.integers(1, 5))
def test_sample_shape_and_determinism_property(seed, q, d):
    a = sample(normal(), q, d, seed=seed)
    b = sample(normal(), q, d, seed=seed)
    assert a.values.shape == (q, d)
    assert np.array_equal(a.values, b.values)
