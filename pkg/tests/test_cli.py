"""Tests for the bugs-inference command line."""

import json

import pytest

from src import cli
from src.errors import AlgorithmError, ConfigError, CycleError, NumericError, ParseError

from .conftest import PUMP_DIR


@pytest.fixture
def short_config(tmp_path):
    """A pump config with short runs; paths are relative to the bundled model directory."""
    document = json.loads((PUMP_DIR / "config.json").read_text())
    for key in ("model", "constants", "data", "inits"):
        document[key] = str(PUMP_DIR / document[key])
    document["out"] = str(tmp_path / "from_config")
    document["mcmc"].update(niter=1000, burnin=100)
    document["is"]["m"] = 500
    path = tmp_path / "config.json"
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


def test_check_prints_structure(capsys):
    code = cli.main(
        ["check", "--model", str(PUMP_DIR / "pump.bugs"), "--constants", str(PUMP_DIR / "constants.json")]
    )
    assert code == cli.EXIT_OK
    output = capsys.readouterr().out
    assert output.startswith("32 nodes")
    assert "  theta[10]" in output


def test_mcmc_with_config_and_overrides(short_config, tmp_path, capsys):
    out = tmp_path / "override"
    code = cli.main(["mcmc", "--config", str(short_config), "--out", str(out), "--seed", "5"])
    assert code == cli.EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["seed"] == 5
    assert report["rows"] == 900
    assert (out / "samples.csv").exists()
    assert not (tmp_path / "from_config").exists()


def test_importance_from_config(short_config, tmp_path, capsys):
    assert cli.main(["is", "--config", str(short_config)]) == cli.EXIT_OK
    assert json.loads(capsys.readouterr().out)["m"] == 500
    assert (tmp_path / "from_config" / "importance_estimate.json").exists()


def test_missing_model_is_a_configuration_error(tmp_path):
    assert cli.main(["check", "--model", str(tmp_path / "missing.bugs")]) == cli.EXIT_CONFIG


def test_parse_error_is_a_model_error(tmp_path):
    model = tmp_path / "broken.bugs"
    model.write_text("x ~ dnorm(0, \n", encoding="utf-8")
    assert cli.main(["check", "--model", str(model)]) == cli.EXIT_MODEL


def test_runtime_failure_exit_code(short_config, tmp_path):
    document = json.loads(short_config.read_text())
    document["mcmc"]["burnin"] = 5000
    short_config.write_text(json.dumps(document), encoding="utf-8")
    assert cli.main(["mcmc", "--config", str(short_config), "--out", str(tmp_path / "run")]) == cli.EXIT_RUNTIME


def test_unexpected_failure_is_logged_with_runtime_code(short_config, mocker, caplog):
    failing = mocker.Mock(side_effect=RuntimeError("disk vanished"))
    mocker.patch.dict(cli.COMMANDS, {"mcmc": failing})
    assert cli.main(["mcmc", "--config", str(short_config)]) == cli.EXIT_RUNTIME
    failing.assert_called_once()
    (record,) = [r for r in caplog.records if r.name == cli.logger.name]
    assert record.getMessage() == "Unexpected failure in mcmc"
    assert record.exc_info[0] is RuntimeError


def test_usage_errors_exit_with_configuration_code():
    with pytest.raises(SystemExit) as excinfo:
        cli.main(["sample"])
    assert excinfo.value.code == cli.EXIT_CONFIG
    with pytest.raises(SystemExit) as excinfo:
        cli.main(["check", "--chains", "2"])
    assert excinfo.value.code == cli.EXIT_CONFIG


@pytest.mark.parametrize(
    "error, code",
    [
        (ConfigError("bad"), cli.EXIT_CONFIG),
        (ParseError("bad", 1, 1, "x"), cli.EXIT_MODEL),
        (CycleError(["a", "b", "a"]), cli.EXIT_MODEL),
        (AlgorithmError("bad"), cli.EXIT_RUNTIME),
        (NumericError("bad"), cli.EXIT_RUNTIME),
    ],
)
def test_exit_code_for(error, code):
    assert cli.exit_code_for(error) == code
