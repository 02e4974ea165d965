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

from .app import celery
from .utils import _run_inference_command

# Task name used to register and route the task to the correct queue.
CHECK_TASK_NAME = "openrelik-worker-bugs-inference.tasks.check"

# Task metadata for registration in the core system.
CHECK_TASK_METADATA = {
    "display_name": "BUGS: Check model",
    "description": "Parses and builds a BUGS model (.bugs) with its constants and optional data, and reports node classes, topological order and inserted lifted nodes.",
    "task_config": [],
}


@celery.task(bind=True, name=CHECK_TASK_NAME, metadata=CHECK_TASK_METADATA)
def check_command(
    self,
    pipe_result: str = None,
    input_files: list = None,
    output_path: str = None,
    workflow_id: str = None,
    task_config: dict = None,
) -> str:
    """Build the model graph and write its structure report."""
    return _run_inference_command(
        command="check",
        pipe_result=pipe_result,
        input_files=input_files,
        output_path=output_path,
        workflow_id=workflow_id,
        task_config=task_config,
    )
