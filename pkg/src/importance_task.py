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
IMPORTANCE_TASK_NAME = "openrelik-worker-bugs-inference.tasks.importance_sample"

# Task metadata for registration in the core system.
IMPORTANCE_TASK_METADATA = {
    "display_name": "BUGS: Importance sampling",
    "description": "Estimates the marginal probability of the data below the chosen nodes by importance sampling from their prior, with a Monte Carlo standard error.",
    "task_config": [
        {
            "name": "sample_nodes",
            "label": "Sample nodes",
            "description": "Semicolon-separated nodes to draw from their prior (e.g. 'theta[1:3]').",
            "type": "text",
            "required": True,
        },
        {
            "name": "m",
            "label": "Number of draws",
            "description": "Number of prior draws.",
            "type": "text",
            "default": "10000",
            "required": False,
        },
        {
            "name": "seed",
            "label": "Random seed",
            "description": "Fix the seed for a reproducible estimate.",
            "type": "text",
            "required": False,
        },
    ],
}


@celery.task(bind=True, name=IMPORTANCE_TASK_NAME, metadata=IMPORTANCE_TASK_METADATA)
def importance_sample_command(
    self,
    pipe_result: str = None,
    input_files: list = None,
    output_path: str = None,
    workflow_id: str = None,
    task_config: dict = None,
) -> str:
    """Estimate a marginal probability by importance sampling."""
    return _run_inference_command(
        command="is",
        pipe_result=pipe_result,
        input_files=input_files,
        output_path=output_path,
        workflow_id=workflow_id,
        task_config=task_config,
    )
