"""Tests for run configuration and the batch commands."""

import dataclasses
import json
from pathlib import Path

import pandas as pd
import pytest

from src.commands import (
    RunConfig,
    cmd_check,
    cmd_importance_sample,
    cmd_mcem,
    cmd_mcmc,
    format_check_report,
)
from src.errors import ConfigError

from .conftest import PUMP_DIR


@pytest.fixture
def pump_config(tmp_path):
    """The bundled pump run configuration, shortened and writing into tmp_path."""
    config = RunConfig.from_file(PUMP_DIR / "config.json").with_overrides(out=str(tmp_path / "out"))
    return dataclasses.replace(
        config,
        mcmc=dataclasses.replace(config.mcmc, niter=2000, burnin=500),
        mcem=dataclasses.replace(config.mcem, m_initial=200, m_max=1000, max_iter=4),
        importance=dataclasses.replace(config.importance, m=2000),
    )


def test_config_from_file():
    config = RunConfig.from_file(PUMP_DIR / "config.json")
    assert config.model == str(PUMP_DIR / "pump.bugs")
    assert config.inits == str(PUMP_DIR / "inits.json")
    assert config.out == str(PUMP_DIR / "out")
    assert config.seed == 1
    assert config.mcmc.add_samplers == [{"kind": "RW_block", "targets": ["alpha", "beta"]}]
    assert config.importance.sample_nodes == ["theta"]
    assert config.importance.m == 10000
    assert config.mcem.m_max == 25000
    assert config.mcem.m_initial == 1000


def test_config_overrides_skip_none():
    config = RunConfig(model="a.bugs", seed=3).with_overrides(model=None, seed=4, data="d.json")
    assert (config.model, config.seed, config.data) == ("a.bugs", 4, "d.json")


@pytest.mark.parametrize(
    "document, message",
    [
        ({"modle": "pump.bugs"}, "unknown RunConfig setting"),
        ({"mcmc": {"niters": 10}}, "unknown McmcSettings setting"),
        ({"is": {"samples": ["theta"]}}, "unknown ImportanceSettings setting"),
        ([], "expected a JSON object"),
    ],
)
def test_config_errors(document, message):
    with pytest.raises(ConfigError, match=message):
        RunConfig.from_dict(document)


def test_config_file_errors(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("{", encoding="utf-8")
    with pytest.raises(ConfigError, match="invalid JSON"):
        RunConfig.from_file(path)
    with pytest.raises(ConfigError, match="cannot read config"):
        RunConfig.from_file(tmp_path / "missing.json")


def test_check_report(pump_files, tmp_path):
    report = cmd_check(
        pump_files["model"],
        pump_files["constants"],
        pump_files["data"],
        out=str(tmp_path),
        inits_path=pump_files["inits"],
    )
    assert report["nodes"] == 32
    assert report["counts"] == {
        "top": 2,
        "latent": 10,
        "end": 10,
        "data": 10,
        "stochastic": 22,
        "deterministic": 10,
        "lifted": 0,
    }
    assert report["top"] == ["alpha", "beta"]
    assert report["topological_order"][:3] == ["alpha", "beta", "theta[1]"]
    assert json.loads((tmp_path / "structure.json").read_text())["nodes"] == 32

    text = format_check_report(report)
    assert text.splitlines()[0].startswith("32 nodes (top=2, latent=10")
    assert "lifted nodes:" not in text


def test_check_lists_lifted_nodes(pump_files):
    report = cmd_check(str(PUMP_DIR / "pump_scale.bugs"), pump_files["constants"])
    assert report["counts"]["lifted"] == 1
    assert "lifted nodes:" in format_check_report(report)


def test_missing_model():
    with pytest.raises(ConfigError, match="no model file given"):
        cmd_check(None)


def test_mcmc_command_writes_outputs(pump_config):
    report = cmd_mcmc(pump_config)
    out = Path(pump_config.out)
    for name in ("samples.csv", "run_report.json", "summary.csv", "acf.csv", "correlation.csv"):
        assert (out / name).exists()
    assert len(report["samplers"]) == 13
    assert report["samplers"][-1]["kind"] == "RW_block"
    assert report["rows"] == 1500
    samples = pd.read_csv(out / "samples.csv")
    assert list(samples.columns) == ["alpha", "beta"]
    assert len(samples) == 1500


def test_mcmc_fixed_seed_is_byte_identical(pump_config, tmp_path):
    first = dataclasses.replace(pump_config, out=str(tmp_path / "first"))
    second = dataclasses.replace(pump_config, out=str(tmp_path / "second"))
    cmd_mcmc(first)
    cmd_mcmc(second)
    assert (tmp_path / "first" / "samples.csv").read_bytes() == (tmp_path / "second" / "samples.csv").read_bytes()


def test_mcmc_multiple_chains(pump_config, tmp_path):
    config = dataclasses.replace(pump_config, chains=2, out=str(tmp_path / "chains"))
    combined = cmd_mcmc(config)
    assert len(combined["chains"]) == 2
    assert combined["chains"][0]["seed"] != combined["chains"][1]["seed"]
    first = (tmp_path / "chains" / "chain_1" / "samples.csv").read_text()
    second = (tmp_path / "chains" / "chain_2" / "samples.csv").read_text()
    assert first != second


def test_mcmc_rejects_bad_chain_count(pump_config):
    with pytest.raises(ConfigError, match="chains must be at least 1"):
        cmd_mcmc(dataclasses.replace(pump_config, chains=0))


def test_mcem_command_writes_outputs(pump_config):
    report = cmd_mcem(pump_config)
    assert set(report["estimates"]) == {"alpha", "beta"}
    assert report["iterations"] == len(pd.read_csv(f"{pump_config.out}/mcem_trace.csv"))
    estimates = pd.read_csv(f"{pump_config.out}/estimates.csv")
    assert list(estimates["name"]) == ["alpha", "beta"]
    assert json.loads((Path(pump_config.out) / "run_report.json").read_text())["seed"] == 1


def test_importance_command_writes_estimate(pump_config):
    result = cmd_importance_sample(pump_config)
    assert result["m"] == 2000
    assert result["sample_nodes"] == [f"theta[{i}]" for i in range(1, 11)]
    assert result["estimate"] >= 0
    saved = json.loads((Path(pump_config.out) / "importance_estimate.json").read_text())
    assert saved["log_estimate"] == pytest.approx(result["log_estimate"])


@pytest.mark.parametrize(
    "importance, message",
    [
        ({"sample_nodes": []}, "at least one sample node"),
        ({"proposal": "posterior"}, "unsupported proposal"),
    ],
)
def test_importance_command_errors(pump_config, importance, message):
    config = dataclasses.replace(pump_config, importance=dataclasses.replace(pump_config.importance, **importance))
    with pytest.raises(ConfigError, match=message):
        cmd_importance_sample(config)
