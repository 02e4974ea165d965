"""Tests for Monte Carlo EM."""

import numpy as np
import pytest

from src.definition import build_model_definition
from src.errors import AlgorithmError
from src.mcem import MCEM, McemControl, build_mcem
from src.model import Model
from src.parser import parse_model

Y = [1.2, -0.4, 2.1, 0.8, 1.5, 0.3, -1.0, 1.9, 0.6, 1.1]

NORMAL_SAMPLE = """
mu ~ dnorm(0, sd = 100)
sigma ~ dexp(0.01)
for (i in 1:N) {
  y[i] ~ dnorm(mu, sd = sigma)
}
"""

HIERARCHICAL_NORMAL = """
mu ~ dnorm(0, sd = 100)
for (i in 1:N) {
  b[i] ~ dnorm(mu, sd = 1)
  y[i] ~ dnorm(b[i], sd = 1)
}
"""


def _model(text, constants=None, data=None, inits=None, seed=1):
    definition = build_model_definition(parse_model(text), constants or {})
    return Model(definition, data=data, inits=inits, seed=seed)


def test_sample_size_schedule():
    control = McemControl()
    assert [control.sample_size(t) for t in range(1, 6)] == [1000, 2000, 3000, 4000, 6000]
    assert control.sample_size(20) == 25000


def test_pump_maximum_likelihood(pump_model):
    mcem = MCEM(pump_model)
    assert [node.name for node in mcem.param_nodes] == ["alpha", "beta"]
    assert [node.name for node in mcem.latent_nodes] == [f"theta[{i}]" for i in range(1, 11)]

    estimates = mcem.run()

    assert mcem.converged
    assert estimates["alpha"] == pytest.approx(0.82, abs=0.05)
    assert estimates["beta"] == pytest.approx(1.26, abs=0.05)
    assert pump_model["alpha"] == estimates["alpha"]
    assert [entry["samples"] for entry in mcem.trace[:3]] == [1000, 2000, 3000]


def test_no_latent_nodes_maximizes_joint_likelihood():
    model = _model(NORMAL_SAMPLE, {"N": len(Y)}, {"y": Y}, {"mu": 0.0, "sigma": 1.0})
    mcem = build_mcem(model)
    assert mcem.latent_nodes == []

    estimates = mcem.run()

    assert mcem.converged
    assert len(mcem.trace) == 1
    assert estimates["mu"] == pytest.approx(np.mean(Y), abs=1e-3)
    assert estimates["sigma"] == pytest.approx(np.std(Y), abs=1e-3)


def test_unit_interval_parameter_on_logit_scale():
    model = _model("p ~ dbeta(1, 1)\ny ~ dbin(p, 10)", data={"y": 7}, inits={"p": 0.5})
    assert build_mcem(model).run()["p"] == pytest.approx(0.7, abs=1e-3)


def test_hierarchical_normal_recovers_closed_form_mle():
    """b[i] ~ N(mu, 1), y[i] ~ N(b[i], 1) makes y[i] ~ N(mu, 2): the MLE of mu is mean(y)."""
    model = _model(HIERARCHICAL_NORMAL, {"N": len(Y)}, {"y": Y}, {"mu": 0.0}, seed=8)
    mcem = MCEM(model, control=McemControl(m_initial=500, m_max=5000, max_iter=40))

    estimates = mcem.run()

    assert mcem.converged
    assert estimates["mu"] == pytest.approx(np.mean(Y), abs=0.02)
    for entry in mcem.trace:
        assert entry["q_new"] >= entry["q_previous"] - 1e-9


def test_not_converged_flag():
    model = _model(HIERARCHICAL_NORMAL, {"N": len(Y)}, {"y": Y}, {"mu": 5.0})
    mcem = MCEM(model, control=McemControl(m_initial=200, tol=1e-12, max_iter=2))
    estimates = mcem.run()
    assert not mcem.converged
    assert len(mcem.trace) == 2
    assert estimates["mu"] == mcem.trace[-1]["mu"]


def test_explicit_nodes(pump_model):
    mcem = MCEM(pump_model, latent_nodes="theta", param_nodes=["alpha"])
    assert [node.name for node in mcem.param_nodes] == ["alpha"]
    assert [node.name for node in mcem.objective_nodes] == [f"theta[{i}]" for i in range(1, 11)]


@pytest.mark.parametrize(
    "latent, params, message",
    [
        (None, ["x[1]"], "must be a scalar non-data stochastic node"),
        (None, ["lambda[1]"], "must be a scalar non-data stochastic node"),
        (["alpha", "theta"], ["alpha"], "both a parameter and a latent node"),
        (["theta", "x"], ["alpha", "beta"], "is data"),
    ],
)
def test_node_errors(pump_model, latent, params, message):
    with pytest.raises(AlgorithmError, match=message):
        MCEM(pump_model, latent_nodes=latent, param_nodes=params)


def test_discrete_parameter_is_rejected():
    model = _model("lam ~ dgamma(1, 1)\nn ~ dpois(lam)", inits={"lam": 1.0, "n": 2})
    with pytest.raises(AlgorithmError, match="continuous parameter"):
        MCEM(model, latent_nodes=[], param_nodes=["n"])
