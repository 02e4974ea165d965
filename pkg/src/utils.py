# Copyright 2025 Google LLC
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import os
import shutil
import tempfile
from pathlib import Path

# pylint: disable=g-multiple-import
from typing import Dict, List, Optional

from celery.utils.log import get_task_logger
from openrelik_worker_common.file_utils import create_output_file
from openrelik_worker_common.task_utils import create_task_result, get_input_files

from .commands import (
    COMMANDS,
    ImportanceSettings,
    McemSettings,
    McmcSettings,
    RunConfig,
    cmd_check,
)

logger = get_task_logger(__name__)

MODEL_EXTENSIONS = (".bugs", ".txt")
VALUE_ROLES = ("constants", "data", "inits")
RESULT_META_KEYS = ("nodes", "estimates", "converged", "estimate", "standard_error")


def _validate_input_file(input_file_path: Optional[str], input_file_display_name: str, command: str):
    """Validates that an input file exists and is readable by the worker.

    Args:
        input_file_path: The absolute path to the input file on the worker.
        input_file_display_name: The display name of the input file for errors.
        command: The inference command, for errors.

    Raises:
        ValueError: If the input_file_path is None or empty.
        FileNotFoundError: If the file does not exist at the given path.
        PermissionError: If the worker does not have read access to the file.
    """
    if not input_file_path:
        raise ValueError(f"Invalid or missing file path for input: {input_file_display_name} for {command}")
    if not os.path.exists(input_file_path):
        raise FileNotFoundError(f"Input file for {command} not found by worker at path: {input_file_path}")
    if not os.access(input_file_path, os.R_OK):
        raise PermissionError(f"Input file for {command} is not readable by worker at path: {input_file_path}")


def _select_input_files(input_files: List[Dict], command: str) -> Dict[str, str]:
    """Assigns input files to roles by display name.

    The model is the file ending in ``.bugs`` (or ``.txt``); constants, data
    and inits are the JSON files whose display names contain those words.

    Returns:
        A mapping of role ("model", "constants", "data", "inits") to path.

    Raises:
        ValueError: If there is no model file, or two files claim one role.
    """
    selected: Dict[str, str] = {}
    for input_file in input_files:
        display_name = input_file.get("display_name") or Path(input_file.get("path", "")).name
        lowered = display_name.lower()
        if lowered.endswith(MODEL_EXTENSIONS):
            role = "model"
        elif lowered.endswith(".json"):
            role = next((r for r in VALUE_ROLES if r in lowered), None)
        else:
            role = None
        if role is None:
            logger.info("Ignoring input file %s for %s", display_name, command)
            continue
        if role in selected:
            raise ValueError(f"More than one {role} file provided to {command}: {display_name}")
        _validate_input_file(input_file.get("path"), display_name, command)
        selected[role] = str(input_file["path"])
    if "model" not in selected:
        raise ValueError(f"No model file (.bugs) provided to {command}.")
    return selected


def _split(value: Optional[str]) -> Optional[List[str]]:
    if value is None or not str(value).strip():
        return None
    return [item.strip() for item in str(value).split(";") if item.strip()]


def _block_samplers(value: Optional[str]) -> List[Dict]:
    """Parses ``alpha; beta | theta[1]; theta[2]`` into block sampler overrides."""
    if not value:
        return []
    blocks = [_split(group) for group in str(value).split("|")]
    return [{"kind": "RW_block", "targets": targets} for targets in blocks if targets]


def _number(task_config: Dict, key: str, cast, default):
    value = task_config.get(key)
    if value is None or value == "":
        return default
    try:
        return cast(value)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"Task setting '{key}' must be a number, got {value!r}") from exc


def _run_config(roles: Dict[str, str], task_config: Dict, out: str) -> RunConfig:
    """Builds a RunConfig from the selected files and the task_config strings.

    Node lists are separated by semicolons, since node names such as
    ``y[2, 3]`` contain commas.
    """
    mcmc = McmcSettings(
        niter=_number(task_config, "niter", int, McmcSettings.niter),
        burnin=_number(task_config, "burnin", int, McmcSettings.burnin),
        thin=_number(task_config, "thin", int, McmcSettings.thin),
        monitors=_split(task_config.get("monitors")),
        add_samplers=_block_samplers(task_config.get("block_samplers")),
    )
    mcem = McemSettings(
        tol=_number(task_config, "tol", float, McemSettings.tol),
        m_max=_number(task_config, "m_max", int, McemSettings.m_max),
        max_iter=_number(task_config, "max_iter", int, McemSettings.max_iter),
        latent_nodes=_split(task_config.get("latent_nodes")),
        param_nodes=_split(task_config.get("param_nodes")),
    )
    importance = ImportanceSettings(
        sample_nodes=_split(task_config.get("sample_nodes")) or [],
        m=_number(task_config, "m", int, ImportanceSettings.m),
    )
    return RunConfig(
        model=roles["model"],
        constants=roles.get("constants"),
        data=roles.get("data"),
        inits=roles.get("inits"),
        seed=_number(task_config, "seed", int, None),
        out=out,
        mcmc=mcmc,
        mcem=mcem,
        importance=importance,
    )


def _build_reporting_command_string(command: str, roles: Dict[str, str], seed: Optional[int]) -> str:
    """Builds the command line shown in the task result, with worker paths abstracted."""
    parts = [f"bugs-inference {command}", "--model <model_file>"]
    for role in VALUE_ROLES:
        if role in roles:
            parts.append(f"--{role} <{role}_file>")
    if seed is not None and command != "check":
        parts.append(f"--seed {seed}")
    return " ".join(parts)


def _register_outputs(directory: str, output_path: str, command: str) -> List[Dict]:
    """Copies every file the command produced into a registered worker output file."""
    output_files = []
    for produced in sorted(p for p in Path(directory).rglob("*") if p.is_file()):
        relative = produced.relative_to(directory)
        stem = "_".join(relative.with_suffix("").parts)
        output_file = create_output_file(
            output_path,
            display_name=f"{command}_{stem}",
            extension=produced.suffix.lstrip("."),
            data_type=f"openrelik:bugs:{command}:{stem}",
        )
        shutil.copyfile(produced, output_file.path)
        output_files.append(output_file.to_dict())
    return output_files


def _run_inference_command(
    command: str,
    pipe_result: str,
    input_files: list,
    output_path: str,
    workflow_id: str,
    task_config: dict,
) -> str:
    """Runs one inference command on the task's input files.

    The model, constants, data and inits files are picked from the input
    files by display name. The command writes into a temporary directory;
    every file it produces becomes a task output file.

    Args:
        command: One of "check", "mcmc", "mcem" or "is".
        pipe_result: Base64-encoded result from the previous Celery task, if any.
        input_files: List of input file dictionaries (used if pipe_result is None).
        output_path: The base path where the worker should save output files.
        workflow_id: The ID of the current workflow.
        task_config: The user configuration for the task.

    Returns:
        A base64-encoded string representing the task result dictionary.

    Raises:
        ValueError: If no input files or no model file are provided, or a
            task setting is malformed.
        BugsError: Propagated from the kernel when the model or run fails.
    """
    processed_input_files = get_input_files(pipe_result, input_files or [])
    if not processed_input_files:
        raise ValueError(f"No input files provided to {command}.")
    task_config = task_config or {}
    roles = _select_input_files(processed_input_files, command)

    temp_dir = tempfile.mkdtemp(prefix=f"bugs_{command}_")
    try:
        config = _run_config(roles, task_config, temp_dir)
        logger.info("Running %s on %s", command, Path(roles["model"]).name)
        if command == "check":
            result = cmd_check(config.model, config.constants, config.data, out=temp_dir, inits_path=config.inits)
        else:
            result = COMMANDS[command](config)
        output_files = _register_outputs(temp_dir, output_path, command)
    finally:
        shutil.rmtree(temp_dir, ignore_errors=True)

    meta = {key: result[key] for key in RESULT_META_KEYS if key in result}
    return create_task_result(
        output_files=output_files,
        workflow_id=workflow_id,
        command=_build_reporting_command_string(command, roles, config.seed),
        meta=meta,
    )
