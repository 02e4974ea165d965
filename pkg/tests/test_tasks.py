"""Tests for the inference worker tasks."""

import base64
import json
import os

import pytest

from src import check_task, importance_task, mcem_task, mcmc_task, utils
from src.errors import ConfigError
from src.utils import _block_samplers, _split

from .conftest import PUMP_DIR


def _decode_result(result_b64: str) -> dict:
    decoded = base64.b64decode(result_b64.encode("utf-8")).decode("utf-8")
    return json.loads(decoded)


def _input_files(*names):
    return [{"path": str(PUMP_DIR / name), "display_name": name} for name in names]


PUMP_INPUTS = ("pump.bugs", "constants.json", "data.json", "inits.json")


def _data_types(result_dict):
    return sorted(output["data_type"] for output in result_dict["output_files"])


def test_check_task(tmp_path):
    """Check reports the graph size and writes the structure file."""

    result = check_task.check_command.run(
        pipe_result=None,
        input_files=_input_files(*PUMP_INPUTS),
        output_path=str(tmp_path),
        workflow_id="wf-123",
        task_config={},
    )

    result_dict = _decode_result(result)
    assert result_dict["workflow_id"] == "wf-123"
    assert result_dict["meta"] == {"nodes": 32}
    assert result_dict["command"] == (
        "bugs-inference check --model <model_file> --constants <constants_file> --data <data_file> "
        "--inits <inits_file>"
    )
    assert _data_types(result_dict) == ["openrelik:bugs:check:structure"]
    with open(result_dict["output_files"][0]["path"], encoding="utf-8") as fh:
        assert json.load(fh)["top"] == ["alpha", "beta"]


def test_mcmc_task(tmp_path):
    """MCMC settings arrive as strings and block samplers are added."""

    result = mcmc_task.mcmc_command.run(
        pipe_result=None,
        input_files=_input_files(*PUMP_INPUTS),
        output_path=str(tmp_path),
        workflow_id="wf-456",
        task_config={"niter": "600", "burnin": "100", "thin": "", "seed": "3", "block_samplers": "alpha; beta"},
    )

    result_dict = _decode_result(result)
    assert _data_types(result_dict) == [
        "openrelik:bugs:mcmc:acf",
        "openrelik:bugs:mcmc:correlation",
        "openrelik:bugs:mcmc:run_report",
        "openrelik:bugs:mcmc:samples",
        "openrelik:bugs:mcmc:summary",
    ]
    assert result_dict["command"].endswith("--inits <inits_file> --seed 3")
    report = next(o for o in result_dict["output_files"] if o["data_type"].endswith(":run_report"))
    with open(report["path"], encoding="utf-8") as fh:
        run_report = json.load(fh)
    assert run_report["rows"] == 500
    assert run_report["samplers"][-1]["targets"] == ["alpha", "beta"]


def test_mcem_task(tmp_path):
    result = mcem_task.mcem_command.run(
        pipe_result=None,
        input_files=_input_files(*PUMP_INPUTS),
        output_path=str(tmp_path),
        workflow_id="wf-789",
        task_config={"max_iter": "2", "m_max": "300", "seed": "1", "param_nodes": "alpha; beta"},
    )

    result_dict = _decode_result(result)
    assert set(result_dict["meta"]["estimates"]) == {"alpha", "beta"}
    assert result_dict["meta"]["converged"] is False
    assert "openrelik:bugs:mcem:estimates" in _data_types(result_dict)
    assert "openrelik:bugs:mcem:mcem_trace" in _data_types(result_dict)


def test_importance_task(tmp_path):
    result = importance_task.importance_sample_command.run(
        pipe_result=None,
        input_files=_input_files(*PUMP_INPUTS),
        output_path=str(tmp_path),
        workflow_id="wf-321",
        task_config={"sample_nodes": "theta[1:3]", "m": "500", "seed": "11"},
    )

    result_dict = _decode_result(result)
    assert result_dict["meta"]["estimate"] > 0
    assert "standard_error" in result_dict["meta"]
    assert _data_types(result_dict) == ["openrelik:bugs:is:importance_estimate"]


def test_importance_task_needs_sample_nodes(tmp_path):
    with pytest.raises(ConfigError, match="at least one sample node"):
        importance_task.importance_sample_command.run(
            pipe_result=None,
            input_files=_input_files(*PUMP_INPUTS),
            output_path=str(tmp_path),
            workflow_id="wf-321",
            task_config={},
        )


def test_temporary_outputs_are_registered_and_cleaned_up(tmp_path, mocker):
    """Each produced file is registered under output_path; the working directory is removed."""
    create_output_file = mocker.spy(utils, "create_output_file")
    rmtree = mocker.spy(utils.shutil, "rmtree")

    result = check_task.check_command.run(
        pipe_result=None,
        input_files=_input_files(*PUMP_INPUTS),
        output_path=str(tmp_path),
        workflow_id="wf-654",
        task_config={},
    )

    create_output_file.assert_called_once_with(
        str(tmp_path),
        display_name="check_structure",
        extension="json",
        data_type="openrelik:bugs:check:structure",
    )
    (call,) = rmtree.call_args_list
    assert not os.path.exists(call.args[0])
    assert _decode_result(result)["output_files"][0]["path"].startswith(str(tmp_path))


def test_unrelated_files_are_ignored(tmp_path):
    inputs = _input_files("pump.bugs", "constants.json") + [
        {"path": str(PUMP_DIR / "config.json"), "display_name": "config.json"}
    ]
    result = check_task.check_command.run(
        pipe_result=None, input_files=inputs, output_path=str(tmp_path), workflow_id="wf-1", task_config=None
    )
    assert _decode_result(result)["command"] == "bugs-inference check --model <model_file> --constants <constants_file>"


@pytest.mark.parametrize(
    "input_files, task_config, error, message",
    [
        ([], {}, ValueError, "No input files provided to mcmc"),
        (_input_files("constants.json", "data.json"), {}, ValueError, "No model file"),
        (_input_files("pump.bugs", "data.json", "data.json"), {}, ValueError, "More than one data file"),
        (_input_files(*PUMP_INPUTS), {"niter": "many"}, ValueError, "'niter' must be a number"),
        (
            [{"path": str(PUMP_DIR / "missing.bugs"), "display_name": "missing.bugs"}],
            {},
            FileNotFoundError,
            "not found by worker",
        ),
    ],
)
def test_mcmc_task_input_errors(tmp_path, input_files, task_config, error, message):
    with pytest.raises(error, match=message):
        mcmc_task.mcmc_command.run(
            pipe_result=None,
            input_files=input_files,
            output_path=str(tmp_path),
            workflow_id="wf-err",
            task_config=task_config,
        )


def test_node_list_settings():
    assert _split(" theta[1:3] ; y[2, 3];") == ["theta[1:3]", "y[2, 3]"]
    assert _split("  ") is None
    assert _block_samplers("alpha; beta | theta[1]; theta[2]") == [
        {"kind": "RW_block", "targets": ["alpha", "beta"]},
        {"kind": "RW_block", "targets": ["theta[1]", "theta[2]"]},
    ]
    assert _block_samplers(None) == []
