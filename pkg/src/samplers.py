"""Adaptive random-walk Metropolis-Hastings samplers.

Every sampler is specialized at construction: it resolves its target and
calculation nodes and prepares the copies between the model and the shared
``current_state`` container. ``run`` only touches those prepared vectors.

On entry to ``run`` the model and ``current_state`` agree on every node;
on exit they agree again on the sampler's calculation nodes, whether the
proposal was accepted or rejected.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from .definition import GraphNode
from .errors import AlgorithmError
from .model import Model
from .model_values import ModelValues, make_copier

logger = logging.getLogger(__name__)

SCALAR_TARGET_ACCEPTANCE = 0.44
BLOCK_TARGET_ACCEPTANCE = 0.234
COVARIANCE_JITTER = 1e-6


@dataclass
class SamplerControl:
    """Tuning knobs shared by the random-walk samplers.

    ``target_acceptance`` defaults to 0.44 for one dimension and 0.234
    otherwise. ``prop_cov`` is the initial block proposal covariance
    (identity when unset).
    """

    scale: float = 1.0
    adaptive: bool = True
    adapt_interval: int = 200
    target_acceptance: Optional[float] = None
    prop_cov: Optional[Sequence[Sequence[float]]] = None

    @classmethod
    def from_dict(cls, values: Optional[Dict]) -> "SamplerControl":
        values = dict(values or {})
        unknown = set(values) - set(cls.__dataclass_fields__)
        if unknown:
            raise AlgorithmError(f"Unknown sampler control setting(s): {sorted(unknown)}")
        return cls(**values)


def decide(log_ratio: float, rng: np.random.Generator) -> int:
    """Metropolis-Hastings acceptance: 1 to accept, 0 to reject.

    A NaN ratio is rejected.
    """
    if math.isnan(log_ratio):
        return 0
    if log_ratio >= 0:
        return 1
    return int(math.log(1.0 - rng.random()) < log_ratio)


def _adaptation_gain(times_adapted: int) -> float:
    return 1.0 / ((times_adapted + 3) ** 0.8)


class Sampler:
    kind = "base"

    def __init__(
        self,
        model: Model,
        current_state: ModelValues,
        targets: Union[str, Sequence[Union[str, GraphNode]]],
        control: Optional[SamplerControl] = None,
    ):
        self.model = model
        self.current_state = current_state
        self.control = control or SamplerControl()
        if self.control.adapt_interval < 1:
            raise AlgorithmError("adapt_interval must be at least 1")
        self.targets: List[GraphNode] = model.expand_node_names(targets)
        if not self.targets:
            raise AlgorithmError(f"{self.kind} sampler has no target nodes")
        for node in self.targets:
            if not node.stochastic:
                raise AlgorithmError(f"Cannot sample deterministic node '{node.name}'")
            if model.data_flags[node.index]:
                raise AlgorithmError(f"Cannot sample data node '{node.name}'")
        self.calc_nodes: List[GraphNode] = model.get_dependencies(self.targets)
        self._keep = make_copier(model, current_state, self.calc_nodes, log_prob=True)
        self._restore = make_copier(current_state, model, self.calc_nodes, log_prob=True)
        self.rng = model.rng
        self.reset()

    def reset(self) -> None:
        """Restore initial tuning and clear acceptance statistics."""
        self.scale = float(self.control.scale)
        self.iterations = 0
        self.accepted = 0
        self.nan_rejections = 0
        self.times_adapted = 0
        self._window_runs = 0
        self._window_accepted = 0
        self.history: List[Dict[str, float]] = []

    @property
    def target_names(self) -> List[str]:
        return [node.name for node in self.targets]

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.iterations if self.iterations else float("nan")

    def _finish(self, log_ratio: float) -> int:
        if math.isnan(log_ratio):
            self.nan_rejections += 1
        jump = decide(log_ratio, self.rng)
        if jump:
            self._keep(1, 1)
        else:
            self._restore(1, 1)
        self.iterations += 1
        self.accepted += jump
        self._window_runs += 1
        self._window_accepted += jump
        return jump

    def _window_rate(self) -> Optional[float]:
        if not self.control.adaptive or self._window_runs < self.control.adapt_interval:
            return None
        rate = self._window_accepted / self._window_runs
        self._window_runs = 0
        self._window_accepted = 0
        self.times_adapted += 1
        return rate

    def _adapt_scale(self, rate: float, target: float) -> None:
        gain = _adaptation_gain(self.times_adapted)
        self.scale *= math.exp(10.0 * gain * (rate - target))
        self.history.append(
            {"iteration": self.iterations, "acceptance_rate": rate, "scale": self.scale}
        )

    def run(self) -> int:
        raise NotImplementedError

    def report(self) -> Dict:
        return {
            "kind": self.kind,
            "targets": self.target_names,
            "iterations": self.iterations,
            "acceptance_rate": self.acceptance_rate,
            "scale": self.scale,
            "nan_rejections": self.nan_rejections,
            "history": list(self.history),
        }


class RWSampler(Sampler):
    """Scalar adaptive random-walk Metropolis sampler with a normal proposal."""

    kind = "RW"
    discrete = False

    def __init__(self, model, current_state, targets, control=None):
        super().__init__(model, current_state, targets, control)
        if len(self.targets) != 1 or self.targets[0].size != 1:
            raise AlgorithmError(
                f"{self.kind} sampler needs one scalar target, got {self.target_names}"
            )
        self.target = self.targets[0]
        self._values = model.values[self.target.variable]
        self._selector = self.target.selector
        self._target_acceptance = self.control.target_acceptance or SCALAR_TARGET_ACCEPTANCE

    def _increment(self) -> float:
        return self.rng.normal(0.0, self.scale)

    def run(self) -> int:
        current = float(self._values[self._selector])
        self._values[self._selector] = current + self._increment()
        jump = self._finish(self.model.calculate_diff(self.calc_nodes))
        rate = self._window_rate()
        if rate is not None:
            self._adapt_scale(rate, self._target_acceptance)
        return jump


class DiscreteRWSampler(RWSampler):
    """Random walk over integers: the normal increment is rounded."""

    kind = "RW_discrete"
    discrete = True

    def _increment(self) -> float:
        return float(np.rint(self.rng.normal(0.0, self.scale)))


class BlockRWSampler(Sampler):
    """Joint adaptive random walk over several nodes.

    Proposals are ``scale * L z`` with ``L`` the Cholesky factor of the
    proposal covariance. Each adaptation window updates the scale towards
    the target acceptance rate and moves the proposal covariance towards
    the window's empirical covariance.
    """

    kind = "RW_block"

    def __init__(self, model, current_state, targets, control=None):
        super().__init__(model, current_state, targets, control)
        self._slots = []
        offset = 0
        for node in self.targets:
            self._slots.append((model.values[node.variable], node.selector, offset, node.size))
            offset += node.size
        self.dimension = offset
        if self.control.prop_cov is None:
            self.initial_cov = np.eye(self.dimension)
        else:
            self.initial_cov = np.asarray(self.control.prop_cov, dtype=float)
            if self.initial_cov.shape != (self.dimension, self.dimension):
                raise AlgorithmError(
                    f"prop_cov must be {self.dimension}x{self.dimension}, "
                    f"got shape {self.initial_cov.shape}"
                )
        default_target = SCALAR_TARGET_ACCEPTANCE if self.dimension == 1 else BLOCK_TARGET_ACCEPTANCE
        self._target_acceptance = self.control.target_acceptance or default_target
        self._reset_covariance()

    def reset(self) -> None:
        super().reset()
        if hasattr(self, "initial_cov"):
            self._reset_covariance()

    def _reset_covariance(self) -> None:
        self.prop_cov = self.initial_cov.copy()
        self._chol = self._factor(self.prop_cov)
        self._window = np.zeros((self.control.adapt_interval, self.dimension))

    def _factor(self, cov: np.ndarray) -> np.ndarray:
        jittered = cov + COVARIANCE_JITTER * np.eye(self.dimension)
        try:
            return np.linalg.cholesky(jittered)
        except np.linalg.LinAlgError as exc:
            raise AlgorithmError(f"Proposal covariance is not positive definite: {exc}") from exc

    def _read(self) -> np.ndarray:
        state = np.empty(self.dimension)
        for values, selector, offset, size in self._slots:
            state[offset : offset + size] = np.ravel(values[selector])
        return state

    def _write(self, state: np.ndarray) -> None:
        for values, selector, offset, size in self._slots:
            values[selector] = state[offset : offset + size].reshape(np.shape(values[selector]))

    def run(self) -> int:
        current = self._read()
        proposal = current + self.scale * (self._chol @ self.rng.standard_normal(self.dimension))
        self._write(proposal)
        jump = self._finish(self.model.calculate_diff(self.calc_nodes))
        if not self.control.adaptive:
            return jump
        self._window[self._window_runs - 1] = self._read()
        rate = self._window_rate()
        if rate is not None:
            gain = _adaptation_gain(self.times_adapted)
            empirical = np.atleast_2d(np.cov(self._window, rowvar=False))
            self.prop_cov = self.prop_cov + gain * (empirical - self.prop_cov)
            self._chol = self._factor(self.prop_cov)
            self._adapt_scale(rate, self._target_acceptance)
        return jump

    def report(self) -> Dict:
        report = super().report()
        report["prop_cov"] = self.prop_cov.tolist()
        return report


SAMPLER_KINDS = {
    RWSampler.kind: RWSampler,
    DiscreteRWSampler.kind: DiscreteRWSampler,
    BlockRWSampler.kind: BlockRWSampler,
}


def build_sampler(
    kind: str,
    model: Model,
    current_state: ModelValues,
    targets,
    control: Optional[SamplerControl] = None,
) -> Sampler:
    try:
        sampler_class = SAMPLER_KINDS[kind]
    except KeyError:
        raise AlgorithmError(f"Unknown sampler kind '{kind}'; expected one of {sorted(SAMPLER_KINDS)}") from None
    return sampler_class(model, current_state, targets, control)
