import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bqcd.channels import (
    ChannelModel,
    DistributionSpec,
    Regime,
    beta,
    exponential,
    gaussian,
    laplace,
    make_llr,
    make_sampler,
    shifted,
    subgaussian_bound,
    unaffected,
)
from bqcd.errors import ConfigError, DomainError

N_DRAWS = 1_000_000


def draw_many(model, regime, rng, n):
    return np.array([model.sample(regime, rng) for _ in range(n)])


class TestSampling:
    def test_gaussian_pre_mean(self):
        model = ChannelModel(gaussian(0.0, 1.0), gaussian(1.0, 1.0))
        draws = draw_many(model, Regime.PRE, np.random.default_rng(1), N_DRAWS)
        assert abs(draws.mean()) < 0.01

    def test_exponential_pre_mean(self):
        model = unaffected(exponential(1.0))
        draws = draw_many(model, Regime.PRE, np.random.default_rng(2), N_DRAWS)
        assert abs(draws.mean() - 1.0) < 0.01

    def test_beta_pre_mean(self):
        model = unaffected(beta(0.02, 1.98))
        draws = draw_many(model, Regime.PRE, np.random.default_rng(3), N_DRAWS)
        assert abs(draws.mean() - 0.01) < 0.002

    def test_post_regime_draws_post_density(self):
        model = ChannelModel(gaussian(0.0, 1.0), gaussian(1000.0, 1.0))
        rng = np.random.default_rng(4)
        assert all(model.sample(Regime.POST, rng) > 500.0 for _ in range(100))
        assert all(model.sample(Regime.PRE, rng) < 500.0 for _ in range(100))

    def test_beta_draws_stay_interior(self):
        model = unaffected(beta(0.02, 1.98))
        rng = np.random.default_rng(5)
        draws = draw_many(model, Regime.PRE, rng, 100_000)
        assert np.all(draws > 0.0) and np.all(draws < 1.0)

    def test_sampler_closure_matches_method(self):
        for spec in (gaussian(0.3, 2.0), exponential(1.5), laplace(-1.0, 0.7), beta(0.4, 1.6)):
            model = unaffected(spec)
            rng = np.random.default_rng(6)
            xs = [model.sample(Regime.PRE, rng) for _ in range(50)]
            fn = make_sampler(spec, np.random.default_rng(6))
            assert xs == [fn() for _ in range(50)]


class TestValidation:
    @pytest.mark.parametrize(
        "bad",
        [
            lambda: gaussian(0.0, 0.0),
            lambda: gaussian(0.0, -1.0),
            lambda: exponential(0.0),
            lambda: laplace(0.0, -0.5),
            lambda: beta(0.0, 1.0),
            lambda: beta(1.0, -2.0),
        ],
    )
    def test_invalid_params_rejected(self, bad):
        with pytest.raises(ConfigError):
            bad()

    def test_family_mismatch_rejected(self):
        with pytest.raises(ConfigError):
            ChannelModel(gaussian(0.0, 1.0), exponential(1.0))

    def test_unknown_family_rejected(self):
        with pytest.raises(ConfigError):
            DistributionSpec("cauchy", {"loc": 0.0})

    def test_serialization_round_trip(self):
        spec = beta(0.02, 1.98)
        assert DistributionSpec.from_dict(spec.to_dict()) == spec


class TestLlr:
    def test_gaussian_midpoint_is_zero(self):
        model = ChannelModel(gaussian(0.0, 1.0), gaussian(1.0, 1.0))
        assert model.llr(0.5) == 0.0

    def test_gaussian_unit_shift_at_one(self):
        model = ChannelModel(gaussian(0.0, 1.0), gaussian(1.0, 1.0))
        assert model.llr(1.0) == pytest.approx(0.5, abs=1e-12)

    def test_identical_densities_llr_zero(self):
        for spec in (gaussian(0.2, 1.3), exponential(2.0), laplace(1.0, 0.5), beta(0.3, 1.7)):
            model = unaffected(spec)
            for x in (0.1, 0.5, 0.9):
                assert model.llr(x) == 0.0

    def test_beta_boundary_is_domain_error(self):
        model = ChannelModel(beta(0.02, 1.98), beta(0.1, 1.9))
        with pytest.raises(DomainError):
            model.llr(0.0)
        with pytest.raises(DomainError):
            model.llr(1.0)

    def test_exponential_negative_is_domain_error(self):
        model = ChannelModel(exponential(1.0), exponential(2.0))
        with pytest.raises(DomainError):
            model.llr(-0.1)

    def test_llr_closure_matches_method(self):
        models = [
            ChannelModel(gaussian(0.0, 1.0), gaussian(1.0, 1.5)),
            ChannelModel(exponential(1.0), exponential(2.0)),
            ChannelModel(laplace(0.0, 1.0), laplace(0.3, 0.8)),
            ChannelModel(beta(0.02, 1.98), beta(0.4, 1.6)),
        ]
        rng = np.random.default_rng(7)
        for model in models:
            fn = make_llr(model)
            for _ in range(200):
                x = model.sample(Regime.POST, rng)
                assert fn(x) == model.llr(x)


@st.composite
def model_pairs(draw):
    family = draw(st.sampled_from(["gaussian", "exponential", "laplace", "beta"]))
    if family == "gaussian":
        pre = gaussian(draw(_finite(-5, 5)), draw(_finite(0.2, 3)))
        post = gaussian(draw(_finite(-5, 5)), draw(_finite(0.2, 3)))
    elif family == "exponential":
        pre = exponential(draw(_finite(0.2, 5)))
        post = exponential(draw(_finite(0.2, 5)))
    elif family == "laplace":
        pre = laplace(draw(_finite(-5, 5)), draw(_finite(0.2, 3)))
        post = laplace(draw(_finite(-5, 5)), draw(_finite(0.2, 3)))
    else:
        pre = beta(draw(_finite(0.1, 4)), draw(_finite(0.1, 4)))
        post = beta(draw(_finite(0.1, 4)), draw(_finite(0.1, 4)))
    return ChannelModel(pre, post)


def _finite(lo, hi):
    return st.floats(lo, hi, allow_nan=False, allow_infinity=False)


class TestLlrProperties:
    @given(model_pairs(), st.integers(0, 2**31))
    @settings(max_examples=80, deadline=None)
    def test_antisymmetric_under_swap(self, model, seed):
        swapped = ChannelModel(model.post, model.pre)
        x = model.sample(Regime.POST, np.random.default_rng(seed))
        assert model.llr(x) == pytest.approx(-swapped.llr(x), rel=1e-11, abs=1e-12)

    @given(model_pairs())
    @settings(max_examples=80, deadline=None)
    def test_kl_positive_when_shifted(self, model):
        if model.affected:
            assert model.kl_divergence() > 0.0
        else:
            assert model.kl_divergence() == 0.0


class TestKlDivergence:
    def test_gaussian_unit_shift(self):
        model = ChannelModel(gaussian(0.0, 1.0), gaussian(1.0, 1.0))
        assert model.kl_divergence() == pytest.approx(0.5, abs=1e-12)

    def test_identical_is_zero(self):
        assert unaffected(laplace(0.0, 1.0)).kl_divergence() == 0.0

    @pytest.mark.parametrize(
        "model",
        [
            ChannelModel(gaussian(0.0, 1.0), gaussian(1.0, 1.0)),
            ChannelModel(exponential(1.0), exponential(2.0)),
            ChannelModel(laplace(0.0, 1.0), laplace(0.1, 1.0)),
            ChannelModel(beta(0.02, 1.98), beta(0.4, 1.6)),
        ],
    )
    def test_kl_matches_mc_mean_llr_under_post(self, model):
        rng = np.random.default_rng(11)
        llrs = np.array([model.llr(model.sample(Regime.POST, rng)) for _ in range(N_DRAWS)])
        se = llrs.std(ddof=1) / math.sqrt(N_DRAWS)
        assert abs(llrs.mean() - model.kl_divergence()) <= 3.0 * se

    @pytest.mark.parametrize(
        "model",
        [
            ChannelModel(gaussian(0.0, 1.0), gaussian(1.0, 1.0)),
            ChannelModel(exponential(1.0), exponential(1.2)),
            ChannelModel(laplace(0.0, 1.0), laplace(0.3, 1.0)),
            ChannelModel(beta(0.02, 1.98), beta(0.1, 1.9)),
        ],
    )
    def test_likelihood_ratio_normalization_under_pre(self, model):
        # E_pre[exp(llr)] = 1; the identity behind the SR martingale
        rng = np.random.default_rng(12)
        ratios = np.array(
            [math.exp(model.llr(model.sample(Regime.PRE, rng))) for _ in range(N_DRAWS)]
        )
        se = ratios.std(ddof=1) / math.sqrt(N_DRAWS)
        assert abs(ratios.mean() - 1.0) <= 3.0 * se


class TestShifted:
    def test_gaussian_location_shift(self):
        assert shifted(gaussian(0.0, 1.0), 0.1) == gaussian(0.1, 1.0)

    def test_exponential_mean_shift(self):
        assert shifted(exponential(1.0), 1.0) == exponential(2.0)

    def test_beta_mean_shift_holds_total(self):
        mild = shifted(beta(0.02, 1.98), 0.04)
        strong = shifted(beta(0.02, 1.98), 0.19)
        assert mild.params["alpha"] == pytest.approx(0.1)
        assert mild.params["beta"] == pytest.approx(1.9)
        assert strong.params["alpha"] == pytest.approx(0.4)
        assert strong.params["beta"] == pytest.approx(1.6)

    def test_zero_shift_is_identity(self):
        spec = laplace(0.0, 1.0)
        assert shifted(spec, 0.0) == spec

    def test_beta_shift_out_of_range_rejected(self):
        with pytest.raises(ConfigError):
            shifted(beta(0.02, 1.98), 1.0)


class TestSubgaussianBound:
    def test_gaussian_scenario_exact(self):
        base = gaussian(0.0, 1.0)
        channels = [ChannelModel(base, shifted(base, s)) for s in (0.0, 0.1, 1.0)]
        assert subgaussian_bound(channels) == 1.0

    def test_empty_affected_set_rejected(self):
        with pytest.raises(ConfigError):
            subgaussian_bound([unaffected(gaussian(0.0, 1.0))])

    def test_empty_list_rejected(self):
        with pytest.raises(ConfigError):
            subgaussian_bound([])

    def test_exponential_within_factor_two_of_llr_variance(self):
        model = ChannelModel(exponential(1.0), exponential(2.0))
        v = subgaussian_bound([model])
        rng = np.random.default_rng(13)
        llrs = np.array([model.llr(model.sample(Regime.POST, rng)) for _ in range(200_000)])
        mc_var = llrs.var(ddof=1)
        assert mc_var <= v <= 4.0 * mc_var

    def test_deterministic(self):
        model = ChannelModel(laplace(0.0, 1.0), laplace(1.0, 1.0))
        assert subgaussian_bound([model]) == subgaussian_bound([model])
