"""Importance sampling estimates of marginal probabilities."""

import logging
import math
from typing import Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from .errors import AlgorithmError
from .model import Model
from .model_values import ModelValues, make_copier

logger = logging.getLogger(__name__)


class ImportanceSampler:
    """Estimate P(data) by weighting draws of ``sample_nodes``.

    The weight of draw k is exp(calculate(calc_nodes) - simulated_log_probs[k])
    where calc_nodes are the dependencies of the sample nodes. Draws whose
    model log probability is NaN add nothing to the sum but still count in
    the denominator.
    """

    def __init__(self, model: Model, sample_nodes):
        self.model = model
        self.sample_nodes = model.expand_node_names(sample_nodes)
        if not self.sample_nodes:
            raise AlgorithmError(f"No nodes match sample nodes {sample_nodes!r}")
        self.calc_nodes = model.get_dependencies(self.sample_nodes)
        self.log_weights = np.empty(0)
        self.nan_rows = 0

    def run(self, mv_sample: ModelValues, simulated_log_probs: Sequence[float]) -> float:
        simulated = np.asarray(simulated_log_probs, dtype=float)
        m = len(mv_sample)
        if m == 0:
            raise AlgorithmError("Importance sample is empty")
        if simulated.shape != (m,):
            raise AlgorithmError(
                f"{m} sample row(s) but {simulated.size} simulated log probabilities"
            )
        load = make_copier(mv_sample, self.model, self.sample_nodes)
        log_weights = np.empty(m)
        for k in range(m):
            load(k + 1, 1)
            log_weights[k] = self.model.calculate(self.calc_nodes) - simulated[k]
        nan = np.isnan(log_weights)
        self.nan_rows = int(nan.sum())
        if self.nan_rows:
            logger.warning("Skipped %d importance sample row(s) with NaN log probability", self.nan_rows)
        self.log_weights = np.where(nan, -np.inf, log_weights)
        return math.exp(self.log_estimate())

    def log_estimate(self) -> float:
        if not len(self.log_weights):
            raise AlgorithmError("run() has not been called")
        if np.all(np.isneginf(self.log_weights)):
            return -math.inf
        return float(logsumexp(self.log_weights) - math.log(len(self.log_weights)))

    def standard_error(self) -> float:
        """Monte Carlo standard error of the last estimate, from the weight variance."""
        m = len(self.log_weights)
        if m < 2:
            return float("nan")
        return float(np.std(np.exp(self.log_weights), ddof=1) / math.sqrt(m))


def build_importance_sampler(model: Model, sample_nodes) -> ImportanceSampler:
    return ImportanceSampler(model, sample_nodes)


def sample_prior(
    model: Model, sample_nodes, m: int, restore: bool = True
) -> Tuple[ModelValues, np.ndarray]:
    """Draw ``m`` sets of ``sample_nodes`` from their prior at the current parent values.

    Returns the draws and their log probabilities under that prior. The
    model is put back in its prior state afterwards unless ``restore`` is
    false.
    """
    if m < 1:
        raise AlgorithmError(f"Number of draws must be positive, got {m}")
    # Node indices follow topological order, so parents are drawn before children.
    nodes = sorted(model.expand_node_names(sample_nodes), key=lambda node: node.index)
    if not nodes:
        raise AlgorithmError(f"No nodes match sample nodes {sample_nodes!r}")
    for node in nodes:
        if not node.stochastic or model.is_data(node):
            raise AlgorithmError(f"Cannot draw data or deterministic node '{node.name}' from a prior")
    variables = sorted({node.variable for node in nodes})
    draws = ModelValues.from_definition(model.definition, m, variables=variables)
    saved = ModelValues.from_definition(model.definition, 1, log_prob=True)
    dependencies = model.get_dependencies(nodes)
    keep = make_copier(model, saved, dependencies, log_prob=True)
    store = make_copier(model, draws, nodes)
    keep(1, 1)
    between = model.get_dependencies(nodes, include_self=False, deterministic_only=True)
    simulated = sorted([*nodes, *between], key=lambda node: node.index)

    log_probs = np.empty(m)
    for k in range(m):
        model.simulate(simulated)
        log_probs[k] = model.calculate(nodes)
        store(1, k + 1)

    if restore:
        make_copier(saved, model, dependencies, log_prob=True)(1, 1)
    logger.debug("Drew %d prior sample(s) of %d node(s)", m, len(nodes))
    return draws, log_probs
