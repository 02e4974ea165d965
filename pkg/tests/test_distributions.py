"""Tests for the distribution registry against scipy.stats."""

import math

import numpy as np
import pytest
from scipy import stats

from src.distributions import (
    DEFAULT_REGISTRY,
    DistributionRegistry,
    DistributionSpec,
    Parameterization,
    Support,
    log_density,
    to_canonical,
)
from src.errors import DistributionError


@pytest.mark.parametrize(
    "name, value, params, reference",
    [
        ("dnorm", 0.3, [1.0, 2.0], stats.norm(1.0, 2.0).logpdf(0.3)),
        ("dgamma", 1.7, [2.5, 0.5], stats.gamma(a=2.5, scale=2.0).logpdf(1.7)),
        ("dexp", 0.4, [3.0], stats.expon(scale=1 / 3.0).logpdf(0.4)),
        ("dpois", 4.0, [2.2], stats.poisson(2.2).logpmf(4)),
        ("dbin", 3.0, [0.3, 10.0], stats.binom(10, 0.3).logpmf(3)),
        ("dbeta", 0.25, [2.0, 5.0], stats.beta(2.0, 5.0).logpdf(0.25)),
        ("dunif", 1.5, [1.0, 4.0], stats.uniform(1.0, 3.0).logpdf(1.5)),
        ("dlnorm", 2.0, [0.1, 0.7], stats.lognorm(s=0.7, scale=math.exp(0.1)).logpdf(2.0)),
        ("dnegbin", 6.0, [0.4, 3.0], stats.nbinom(3.0, 0.4).logpmf(6)),
    ],
)
def test_log_density_matches_scipy(name, value, params, reference):
    assert log_density(name, value, params) == pytest.approx(reference, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize(
    "name, value, params",
    [
        ("dgamma", -1.0, [2.0, 1.0]),
        ("dpois", 2.5, [1.0]),
        ("dbin", 11.0, [0.5, 10.0]),
        ("dbeta", 1.5, [2.0, 2.0]),
        ("dunif", 5.0, [1.0, 4.0]),
        ("dlnorm", 0.0, [0.0, 1.0]),
    ],
)
def test_values_outside_support_have_zero_probability(name, value, params):
    assert log_density(name, value, params) == -math.inf


def test_alternative_parameterizations():
    assert to_canonical("dgamma", {"shape": 2.0, "scale": 0.25}) == {"shape": 2.0, "rate": 4.0}
    assert to_canonical("dnorm", {"mean": 1.0, "tau": 4.0}) == {"mean": 1.0, "sd": 0.5}
    assert to_canonical("dnorm", {"mean": 1.0, "var": 9.0}) == {"mean": 1.0, "sd": 3.0}
    canonical = to_canonical("dgamma", {"mean": 2.0, "sd": 1.0})
    assert canonical == pytest.approx({"shape": 4.0, "rate": 2.0})
    by_mean = log_density("dgamma", 1.3, {"mean": 2.0, "sd": 1.0})
    assert by_mean == pytest.approx(stats.gamma(a=4.0, scale=0.5).logpdf(1.3), rel=1e-12)
    assert DEFAULT_REGISTRY.get("dnorm").spec.positional_names == ("mean", "tau")


def test_unmatched_parameter_set_is_an_error():
    with pytest.raises(DistributionError, match="parameterization"):
        to_canonical("dgamma", {"shape": 2.0, "mean": 1.0})
    with pytest.raises(DistributionError, match="Unknown distribution"):
        log_density("dfoo", 1.0, [1.0])


def test_invalid_parameters():
    """The registry raises; the graph-execution path returns -inf instead."""
    with pytest.raises(DistributionError, match="Invalid parameters"):
        log_density("dnorm", 0.0, [0.0, -1.0])
    dnorm = DEFAULT_REGISTRY.get("dnorm")
    assert dnorm.log_prob(0.0, [0.0, -1.0]) == -math.inf
    batched = dnorm.log_prob(np.zeros(3), [np.zeros(3), np.array([1.0, -1.0, 2.0])])
    assert np.isneginf(batched[1])
    assert batched[0] == pytest.approx(stats.norm.logpdf(0.0))


def test_simulate_respects_support():
    rng = np.random.default_rng(7)
    draws = [DEFAULT_REGISTRY.simulate("dpois", [3.0], rng) for _ in range(200)]
    assert all(d >= 0 and float(d).is_integer() for d in draws)
    beta_draws = [DEFAULT_REGISTRY.simulate("dbeta", {"shape1": 2.0, "shape2": 3.0}, rng) for _ in range(200)]
    assert all(0.0 <= d <= 1.0 for d in beta_draws)
    assert DEFAULT_REGISTRY.get("dpois").spec.discrete
    assert DEFAULT_REGISTRY.get("dgamma").spec.support is Support.POSITIVE


def test_register_user_distribution():
    registry = DEFAULT_REGISTRY.copy()
    registry.register(
        DistributionSpec("dhalfnorm", ("sd",), support=Support.POSITIVE, valid=lambda sd: sd > 0),
        lambda x, sd: stats.halfnorm(scale=sd).logpdf(x),
        lambda rng, sd: abs(float(rng.normal(0.0, sd))),
    )
    assert registry.log_density("dhalfnorm", 1.0, [2.0]) == pytest.approx(stats.halfnorm(scale=2.0).logpdf(1.0))
    assert "dhalfnorm" not in DEFAULT_REGISTRY
    with pytest.raises(DistributionError, match="already registered"):
        registry.register(DistributionSpec("dnorm", ("mean", "sd")), lambda x, m, s: 0.0, lambda rng, m, s: 0.0)


def test_parameterization_must_determine_canonical_parameters():
    registry = DistributionRegistry()
    with pytest.raises(DistributionError, match="does not determine"):
        registry.register(
            DistributionSpec("dodd", ("a", "b"), alternatives=(Parameterization(("a", "c")),)),
            lambda x, a, b: 0.0,
            lambda rng, a, b: 0.0,
        )
