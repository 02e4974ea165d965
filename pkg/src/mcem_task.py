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
MCEM_TASK_NAME = "openrelik-worker-bugs-inference.tasks.mcem"

# Task metadata for registration in the core system.
MCEM_TASK_METADATA = {
    "display_name": "BUGS: Monte Carlo EM",
    "description": "Finds maximum likelihood estimates of top-level parameters with latent nodes integrated out by MCMC, and writes the estimates and the iteration trace.",
    "task_config": [
        {
            "name": "param_nodes",
            "label": "Parameter nodes",
            "description": "Semicolon-separated parameter nodes. Defaults to the top-level nodes.",
            "type": "text",
            "required": False,
        },
        {
            "name": "latent_nodes",
            "label": "Latent nodes",
            "description": "Semicolon-separated latent nodes. Defaults to every latent node.",
            "type": "text",
            "required": False,
        },
        {
            "name": "tol",
            "label": "Tolerance",
            "description": "Stop once estimates change by less than this (max-norm) for 3 iterations.",
            "type": "text",
            "default": "0.005",
            "required": False,
        },
        {
            "name": "m_max",
            "label": "Maximum E-step samples",
            "description": "Cap on the MCMC sample size per E-step.",
            "type": "text",
            "default": "25000",
            "required": False,
        },
        {
            "name": "max_iter",
            "label": "Maximum iterations",
            "description": "Give up (and flag non-convergence) after this many EM iterations.",
            "type": "text",
            "default": "50",
            "required": False,
        },
        {
            "name": "seed",
            "label": "Random seed",
            "description": "Fix the seed for reproducible estimates.",
            "type": "text",
            "required": False,
        },
    ],
}


@celery.task(bind=True, name=MCEM_TASK_NAME, metadata=MCEM_TASK_METADATA)
def mcem_command(
    self,
    pipe_result: str = None,
    input_files: list = None,
    output_path: str = None,
    workflow_id: str = None,
    task_config: dict = None,
) -> str:
    """Run MCEM on the input model and data."""
    return _run_inference_command(
        command="mcem",
        pipe_result=pipe_result,
        input_files=input_files,
        output_path=output_path,
        workflow_id=workflow_id,
        task_config=task_config,
    )
