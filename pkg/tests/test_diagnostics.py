"""Tests for autocorrelation, effective sample size and chain summaries."""

import numpy as np
import pandas as pd
import pytest

from src.diagnostics import acf, effective_sample_size, summarize
from src.errors import DegenerateChainError, DiagnosticsError
from src.mcmc import MCMC, configure_mcmc
from src.model_values import ModelValues


def _ar1(phi, n, seed):
    rng = np.random.default_rng(seed)
    noise = rng.normal(size=n)
    chain = np.empty(n)
    chain[0] = noise[0] / np.sqrt(1 - phi**2)
    for i in range(1, n):
        chain[i] = phi * chain[i - 1] + noise[i]
    return chain


@pytest.fixture
def iid_chain():
    return np.random.default_rng(42).normal(size=100_000)


def test_iid_chain(iid_chain):
    rho = acf(iid_chain, 20)
    assert rho[0] == pytest.approx(1.0)
    assert np.all(np.abs(rho[1:]) < 0.02)
    assert effective_sample_size(iid_chain) == pytest.approx(len(iid_chain), rel=0.1)


def test_ar1_chain():
    chain = _ar1(0.9, 200_000, seed=3)
    assert acf(chain, 5)[1] == pytest.approx(0.9, abs=0.02)
    assert effective_sample_size(chain) == pytest.approx(len(chain) / 19, rel=0.15)


def test_acf_matches_direct_estimate():
    chain = _ar1(0.5, 1000, seed=1)
    centered = chain - chain.mean()
    direct = [np.sum(centered[: len(chain) - k] * centered[k:]) / np.sum(centered**2) for k in range(4)]
    assert np.allclose(acf(chain, 3), direct)


def test_ess_is_affine_invariant():
    chain = _ar1(0.7, 5000, seed=5)
    assert effective_sample_size(3.0 * chain + 7.0) == pytest.approx(effective_sample_size(chain), rel=1e-9)


def test_degenerate_chains():
    with pytest.raises(DegenerateChainError):
        effective_sample_size(np.full(100, 2.5))
    tiny = 5.0 + 1e-13 * np.random.default_rng(0).normal(size=1000)
    with pytest.raises(DegenerateChainError):
        acf(tiny, 10)


@pytest.mark.parametrize("max_lag", [0, 10])
def test_acf_lag_bounds(max_lag):
    with pytest.raises(DiagnosticsError, match="max_lag"):
        acf(np.arange(10.0) if max_lag else np.arange(50.0), max_lag)


def test_ess_needs_enough_draws():
    with pytest.raises(DiagnosticsError, match="at least 100"):
        effective_sample_size(np.random.default_rng(1).normal(size=99))


def _two_column_values():
    values = ModelValues({"a": (), "b": (2,)}, rows=4)
    values["a"][:] = [1.0, 2.0, 3.0, 6.0]
    values["b"][:] = [[0.0, 1.0], [2.0, 1.0], [4.0, 1.0], [6.0, 1.0]]
    return values


def test_summarize_known_moments():
    report = summarize(_two_column_values(), wall_seconds=2.0)
    a = report["a"]
    assert a.n == 4
    assert a.mean == 3.0
    assert a.sd == pytest.approx(np.std([1, 2, 3, 6], ddof=1))
    assert (a.q025, a.q50, a.q975) == pytest.approx(tuple(np.quantile([1, 2, 3, 6], [0.025, 0.5, 0.975])))
    assert a.flag == "short"
    assert report["b[2]"].flag == "degenerate"
    assert report.correlation.loc["a", "b[1]"] == pytest.approx(np.corrcoef([1, 2, 3, 6], [0, 2, 4, 6])[0, 1])
    with pytest.raises(KeyError):
        report["c"]


def test_summarize_single_row():
    values = ModelValues({"a": (), "b": (2,)}, rows=1)
    values["a"][0] = 1.5
    values["b"][0] = [2.0, -1.0]
    report = summarize(values, wall_seconds=1.0)
    assert [chain.mean for chain in report.chains] == [1.5, 2.0, -1.0]
    assert all(chain.ess is None and chain.flag for chain in report.chains)
    assert np.isnan(report.correlation.to_numpy()).all()


def test_summarize_empty():
    with pytest.raises(DiagnosticsError, match="empty"):
        summarize(ModelValues({"a": ()}, rows=0), wall_seconds=1.0)


def test_summarize_pump_chain_and_write(pump_model, tmp_path):
    mcmc = MCMC(configure_mcmc(pump_model))
    samples = mcmc.run(6000, burnin=1000)
    report = summarize(samples, mcmc.wall_seconds, max_lag=20)

    alpha = report["alpha"]
    assert alpha.ess is not None and 0 < alpha.ess <= 5000
    assert alpha.ess_per_second == pytest.approx(alpha.ess / mcmc.wall_seconds)
    assert len(alpha.acf) == 21
    assert report.correlation.loc["alpha", "beta"] > 0

    paths = report.write(tmp_path)
    summary = pd.read_csv(paths["summary"])
    assert list(summary["name"]) == ["alpha", "beta"]
    assert {"mean", "sd", "ess", "ess_per_second", "acf1", "flag"} <= set(summary.columns)
    acf_table = pd.read_csv(paths["acf"], index_col="lag")
    assert len(acf_table) == 21
    assert acf_table["alpha"].iloc[0] == pytest.approx(1.0)
    assert paths["correlation"].exists()

    again = summarize(samples, mcmc.wall_seconds, max_lag=20)
    pd.testing.assert_frame_equal(report.to_frame(), again.to_frame())
