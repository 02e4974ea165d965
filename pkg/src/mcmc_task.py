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
MCMC_TASK_NAME = "openrelik-worker-bugs-inference.tasks.mcmc"

# Task metadata for registration in the core system.
MCMC_TASK_METADATA = {
    "display_name": "BUGS: MCMC",
    "description": "Runs adaptive random-walk Metropolis-Hastings on a BUGS model and writes samples, posterior summaries, autocorrelations and a run report.",
    "task_config": [
        {
            "name": "niter",
            "label": "Iterations",
            "description": "Total number of MCMC iterations, burn-in included.",
            "type": "text",
            "default": "10000",
            "required": False,
        },
        {
            "name": "burnin",
            "label": "Burn-in",
            "description": "Number of initial iterations to discard.",
            "type": "text",
            "default": "1000",
            "required": False,
        },
        {
            "name": "thin",
            "label": "Thinning interval",
            "description": "Record every n-th iteration after burn-in.",
            "type": "text",
            "default": "1",
            "required": False,
        },
        {
            "name": "monitors",
            "label": "Monitored variables",
            "description": "Semicolon-separated variable names. Defaults to the top-level parameters.",
            "type": "text",
            "required": False,
        },
        {
            "name": "block_samplers",
            "label": "Block samplers",
            "description": "Extra block random-walk samplers: node names separated by ';', blocks separated by '|' (e.g. 'alpha; beta').",
            "type": "text",
            "required": False,
        },
        {
            "name": "seed",
            "label": "Random seed",
            "description": "Fix the seed for reproducible samples.",
            "type": "text",
            "required": False,
        },
    ],
}


@celery.task(bind=True, name=MCMC_TASK_NAME, metadata=MCMC_TASK_METADATA)
def mcmc_command(
    self,
    pipe_result: str = None,
    input_files: list = None,
    output_path: str = None,
    workflow_id: str = None,
    task_config: dict = None,
) -> str:
    """Run MCMC on the input model and data."""
    return _run_inference_command(
        command="mcmc",
        pipe_result=pipe_result,
        input_files=input_files,
        output_path=output_path,
        workflow_id=workflow_id,
        task_config=task_config,
    )
