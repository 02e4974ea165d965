"""Monte Carlo EM: MCMC over latent nodes alternating with optimization over parameters."""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from .definition import GraphNode
from .distributions import Support
from .errors import AlgorithmError, NumericError
from .expressions import compile_expression
from .mcmc import MCMC, McmcConfiguration
from .model import Model
from .model_values import ModelValues, make_copier
from .samplers import SamplerControl

logger = logging.getLogger(__name__)


@dataclass
class McemControl:
    """MCEM schedule and stopping rule.

    The E-step at iteration t keeps ``min(m_initial * ceil(growth**(t-1)), m_max)``
    samples after a burn-in of ``burnin_fraction`` of that count. The run
    stops once the max-norm change of the estimates stays below ``tol`` for
    ``consecutive`` iterations.
    """

    tol: float = 0.005
    consecutive: int = 3
    m_initial: int = 1000
    growth: float = 1.5
    m_max: int = 25000
    burnin_fraction: float = 0.1
    max_iter: int = 50
    maxfev: int = 500
    simplex_step: float = 0.1
    sampler: SamplerControl = field(default_factory=SamplerControl)

    def sample_size(self, iteration: int) -> int:
        return int(min(self.m_initial * math.ceil(self.growth ** (iteration - 1)), self.m_max))


@dataclass(frozen=True)
class _Transform:
    to_free: Callable[[float], float]
    to_natural: Callable[[float], float]


_IDENTITY = _Transform(lambda x: x, lambda z: z)
_TRANSFORMS = {
    Support.POSITIVE: _Transform(math.log, math.exp),
    Support.UNIT_INTERVAL: _Transform(lambda x: float(logit(x)), lambda z: float(expit(z))),
    Support.REAL: _IDENTITY,
    Support.BOUNDED: _IDENTITY,
}


class _BatchedObjective:
    """Average log probability of ``nodes`` over the rows of a sample table.

    The sample arrays (one leading row axis) act as the environment; the
    parameter values are broadcast into every row before evaluation.
    """

    def __init__(self, model: Model, nodes: List[GraphNode], params: List[GraphNode], samples: ModelValues):
        definition = model.definition
        self.rows = len(samples)
        self.env: Dict[str, np.ndarray] = {}
        for name, dims in definition.schema().items():
            if name in samples:
                self.env[name] = samples[name].copy()
            else:
                self.env[name] = np.broadcast_to(model.values[name], (self.rows,) + dims).copy()
        self._params = [(self.env[p.variable], (slice(None),) + p.selector) for p in params]
        self._steps = []
        for node in nodes:
            target = self.env[node.variable]
            selector = (slice(None),) + node.selector
            if node.deterministic:
                self._steps.append((False, target, selector, compile_expression(node.expression, self.env, batched=True), None))
            else:
                distribution = definition.distributions[node.distribution]
                params_fns = [compile_expression(expr, self.env, batched=True) for _, expr in node.params]
                self._steps.append((True, target, selector, params_fns, distribution.log_prob))

    def __call__(self, values: np.ndarray) -> float:
        for (array, selector), value in zip(self._params, values):
            array[selector] = value
        total = 0.0
        with np.errstate(all="ignore"):
            for stochastic, target, selector, fn, log_prob in self._steps:
                if stochastic:
                    total += float(np.sum(log_prob(target[selector], [p() for p in fn])))
                else:
                    target[selector] = fn()
        return total / self.rows


class MCEM:
    """Maximum likelihood for ``param_nodes`` with ``latent_nodes`` integrated out.

    The objective is the average log probability of the parameters'
    dependencies (the parameters' own priors excluded) over the E-step
    samples. Positive parameters are optimized on the log scale and
    unit-interval ones on the logit scale.
    """

    def __init__(
        self,
        model: Model,
        latent_nodes=None,
        param_nodes=None,
        control: Optional[McemControl] = None,
    ):
        self.model = model
        self.control = control or McemControl()
        self.latent_nodes = (
            model.classify_nodes("latent") if latent_nodes is None else model.expand_node_names(latent_nodes)
        )
        self.param_nodes = (
            model.classify_nodes(["top", "nondata"])
            if param_nodes is None
            else model.expand_node_names(param_nodes)
        )
        if not self.param_nodes:
            raise AlgorithmError("MCEM needs at least one parameter node")
        latent_set = {node.index for node in self.latent_nodes}
        self._transforms: List[_Transform] = []
        for node in self.param_nodes:
            if not node.stochastic or model.is_data(node) or node.size != 1:
                raise AlgorithmError(f"Parameter '{node.name}' must be a scalar non-data stochastic node")
            if node.index in latent_set:
                raise AlgorithmError(f"'{node.name}' cannot be both a parameter and a latent node")
            spec = model.definition.distributions[node.distribution].spec
            if spec.discrete or spec.support not in _TRANSFORMS:
                raise AlgorithmError(
                    f"Parameter '{node.name}' has {spec.support.value} support; MCEM needs a continuous parameter"
                )
            self._transforms.append(_TRANSFORMS[spec.support])
        for node in self.latent_nodes:
            if model.is_data(node):
                raise AlgorithmError(f"Latent node '{node.name}' is data")

        self.objective_nodes = model.get_dependencies(self.param_nodes, include_self=False)
        self._param_dependencies = model.get_dependencies(self.param_nodes)
        if self.latent_nodes:
            config = McmcConfiguration(
                model,
                nodes=self.latent_nodes,
                monitors=model.definition.variable_names(),
                control=self.control.sampler,
            )
            self.mcmc: Optional[MCMC] = MCMC(config)
        else:
            self.mcmc = None
            self._snapshot = ModelValues.from_definition(model.definition, 1)
            self._take_snapshot = make_copier(model, self._snapshot, list(model.definition.nodes))
        self.estimates: Dict[str, float] = {}
        self.converged = False
        self.trace: List[Dict] = []

    def _current(self) -> np.ndarray:
        return np.array([float(self.model.node_value(node)) for node in self.param_nodes])

    def _to_free(self, natural: np.ndarray) -> np.ndarray:
        return np.array([t.to_free(v) for t, v in zip(self._transforms, natural)])

    def _to_natural(self, free: np.ndarray) -> np.ndarray:
        return np.array([t.to_natural(z) for t, z in zip(self._transforms, free)])

    def _set_parameters(self, natural: np.ndarray) -> None:
        for node, value in zip(self.param_nodes, natural):
            self.model.values[node.variable][node.selector] = value
        self.model.calculate(self._param_dependencies)

    def _samples(self, iteration: int) -> ModelValues:
        if self.mcmc is None:
            self._take_snapshot(1, 1)
            return self._snapshot
        m = self.control.sample_size(iteration)
        burnin = int(self.control.burnin_fraction * m)
        return self.mcmc.run(m + burnin, burnin=burnin, reset=iteration == 1)

    def _maximize(self, objective: _BatchedObjective, start: np.ndarray) -> Tuple[np.ndarray, float]:
        def negative(free: np.ndarray) -> float:
            value = objective(self._to_natural(free))
            return -value if np.isfinite(value) else math.inf

        simplex = np.vstack([start] + [start + self.control.simplex_step * row for row in np.eye(len(start))])
        result = minimize(
            negative,
            start,
            method="Nelder-Mead",
            options={
                "maxfev": self.control.maxfev,
                "initial_simplex": simplex,
                "xatol": 1e-6,
                "fatol": 1e-9,
            },
        )
        if not np.isfinite(result.fun):
            raise NumericError("M-step objective is not finite at any evaluated parameter value")
        return result.x, -float(result.fun)

    def run(self) -> Dict[str, float]:
        """Iterate E- and M-steps; returns the parameter estimates by node name."""
        natural = self._current()
        self.trace = []
        self.converged = False
        streak = 0
        iterations = 1 if self.mcmc is None else self.control.max_iter
        for iteration in range(1, iterations + 1):
            samples = self._samples(iteration)
            objective = _BatchedObjective(self.model, self.objective_nodes, self.param_nodes, samples)
            q_previous = objective(natural)
            free, q_new = self._maximize(objective, self._to_free(natural))
            updated = self._to_natural(free)
            change = float(np.max(np.abs(updated - natural)))
            natural = updated
            self._set_parameters(natural)
            self.trace.append(
                {
                    "iteration": iteration,
                    "samples": len(samples),
                    **{node.name: float(v) for node, v in zip(self.param_nodes, natural)},
                    "q_previous": q_previous,
                    "q_new": q_new,
                    "max_change": change,
                }
            )
            logger.info(
                "MCEM iteration %d (m=%d): %s, max change %.5f",
                iteration,
                len(samples),
                ", ".join(f"{node.name}={v:.5f}" for node, v in zip(self.param_nodes, natural)),
                change,
            )
            if self.mcmc is None:
                self.converged = True
                break
            streak = streak + 1 if change < self.control.tol else 0
            if streak >= self.control.consecutive:
                self.converged = True
                break
        if not self.converged:
            logger.warning("MCEM did not converge in %d iteration(s)", iterations)
        self.estimates = {node.name: float(v) for node, v in zip(self.param_nodes, natural)}
        return dict(self.estimates)


def build_mcem(model: Model, latent_nodes=None, param_nodes=None, control: Optional[McemControl] = None) -> MCEM:
    return MCEM(model, latent_nodes=latent_nodes, param_nodes=param_nodes, control=control)
