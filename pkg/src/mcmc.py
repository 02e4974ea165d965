"""MCMC configuration (sampler assignments, monitors) and the MCMC runner."""

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Union

from .definition import GraphNode
from .errors import AlgorithmError, ModelDefinitionError
from .model import Model
from .model_values import ModelValues, make_copier
from .samplers import SAMPLER_KINDS, Sampler, SamplerControl, build_sampler

logger = logging.getLogger(__name__)


@dataclass
class SamplerSpec:
    kind: str
    targets: List[GraphNode]
    control: SamplerControl = field(default_factory=SamplerControl)

    def describe(self) -> str:
        return f"{self.kind} sampler: {', '.join(node.name for node in self.targets)}"


class McmcConfiguration:
    """Ordered sampler assignments plus the monitored variables.

    The default assignment gives every non-data stochastic node in
    ``nodes`` (all of them when omitted) its own sampler in topological
    order: ``RW`` for continuous scalars, ``RW_discrete`` for discrete
    scalars and ``RW_block`` for multivariate nodes.
    """

    def __init__(
        self,
        model: Model,
        nodes=None,
        monitors: Optional[Iterable[str]] = None,
        control: Optional[SamplerControl] = None,
        default_samplers: bool = True,
    ):
        self.model = model
        self.control = control or SamplerControl()
        self.samplers: List[SamplerSpec] = []
        if default_samplers:
            candidates = (
                model.classify_nodes(["stochastic", "nondata"])
                if nodes is None
                else [n for n in model.expand_node_names(nodes) if n.stochastic and not model.is_data(n)]
            )
            for node in candidates:
                self.samplers.append(SamplerSpec(self._default_kind(node), [node], self.control))
        if monitors is None:
            monitors = self._default_monitors()
        self.monitors: List[str] = []
        self.add_monitors(monitors)

    def _default_kind(self, node: GraphNode) -> str:
        if node.size > 1:
            return "RW_block"
        spec = self.model.definition.distributions[node.distribution].spec
        return "RW_discrete" if spec.discrete else "RW"

    def _default_monitors(self) -> List[str]:
        names: List[str] = []
        for node in self.model.classify_nodes(["top", "nondata"]):
            if node.variable not in names:
                names.append(node.variable)
        return names

    def add_monitors(self, monitors: Iterable[str]) -> None:
        if isinstance(monitors, str):
            monitors = [monitors]
        variables = self.model.definition.variables
        for name in monitors:
            if name not in variables:
                raise AlgorithmError(f"Cannot monitor unknown variable '{name}'")
            if name not in self.monitors:
                self.monitors.append(name)

    def add_sampler(
        self,
        kind: str,
        targets: Union[str, Sequence[str]],
        control: Optional[Union[SamplerControl, Dict]] = None,
    ) -> SamplerSpec:
        if kind not in SAMPLER_KINDS:
            raise AlgorithmError(f"Unknown sampler kind '{kind}'; expected one of {sorted(SAMPLER_KINDS)}")
        try:
            nodes = self.model.expand_node_names(targets)
        except ModelDefinitionError as exc:
            raise AlgorithmError(f"Cannot add {kind} sampler for {targets!r}: {exc}") from exc
        if not nodes:
            raise AlgorithmError(f"No nodes match sampler targets {targets!r}")
        for node in nodes:
            if not node.stochastic or self.model.is_data(node):
                raise AlgorithmError(f"Cannot add a sampler for data or deterministic node '{node.name}'")
        if isinstance(control, dict) or control is None:
            merged = dict(vars(self.control))
            merged.update(control or {})
            control = SamplerControl.from_dict(merged)
        spec = SamplerSpec(kind, nodes, control)
        self.samplers.append(spec)
        return spec

    def remove_samplers(self, which: Union[int, str, Sequence[Union[int, str]]]) -> int:
        """Remove samplers by position (0-based) or by target node names.

        A name removes every sampler whose targets overlap the named nodes.
        Returns the number removed.
        """
        if isinstance(which, (int, str)):
            which = [which]
        drop = set()
        for item in which:
            if isinstance(item, int):
                if not 0 <= item < len(self.samplers):
                    raise AlgorithmError(f"No sampler at position {item}")
                drop.add(item)
            else:
                named = {node.index for node in self.model.expand_node_names(item)}
                drop.update(
                    i for i, spec in enumerate(self.samplers) if named & {n.index for n in spec.targets}
                )
        self.samplers = [spec for i, spec in enumerate(self.samplers) if i not in drop]
        return len(drop)

    def list_samplers(self) -> List[str]:
        return [f"[{i}] {spec.describe()}" for i, spec in enumerate(self.samplers)]

    def __len__(self) -> int:
        return len(self.samplers)


def configure_mcmc(
    model: Model,
    nodes=None,
    monitors: Optional[Iterable[str]] = None,
    control: Optional[SamplerControl] = None,
) -> McmcConfiguration:
    return McmcConfiguration(model, nodes=nodes, monitors=monitors, control=control)


class MCMC:
    """Specialized MCMC: the samplers of a configuration built against its model."""

    def __init__(self, config: McmcConfiguration):
        self.config = config
        self.model = config.model
        definition = self.model.definition
        self.current_state = ModelValues.from_definition(definition, rows=1, log_prob=True)
        self._sync = make_copier(self.model, self.current_state, list(definition.nodes), log_prob=True)
        self.samplers: List[Sampler] = [
            build_sampler(spec.kind, self.model, self.current_state, spec.targets, spec.control)
            for spec in config.samplers
        ]
        self.monitors = list(config.monitors)
        self.samples = ModelValues.from_definition(definition, 0, variables=self.monitors)
        self.wall_seconds = 0.0
        self.last_run: Dict[str, int] = {}

    def run(self, niter: int, thin: int = 1, burnin: int = 0, reset: bool = True) -> ModelValues:
        """Run ``niter`` iterations (burn-in included) and return the recorded samples.

        Iteration ``i`` (1-based) is recorded when ``i > burnin`` and
        ``(i - burnin) % thin == 0``. With ``reset=False`` the samplers keep
        their adapted scales and statistics from the previous run.
        """
        if niter < 0:
            raise AlgorithmError(f"niter must be non-negative, got {niter}")
        if thin < 1:
            raise AlgorithmError(f"thin must be at least 1, got {thin}")
        if not 0 <= burnin <= niter:
            raise AlgorithmError(f"burnin must be between 0 and niter ({niter}), got {burnin}")
        if reset:
            for sampler in self.samplers:
                sampler.reset()
        rows = (niter - burnin) // thin
        self.samples = ModelValues.from_definition(self.model.definition, rows, variables=self.monitors)
        self._sync(1, 1)

        values = self.model.values
        monitored = [(values[name], self.samples.arrays[name]) for name in self.monitors]
        samplers = self.samplers
        row = 0
        started = time.perf_counter()
        for iteration in range(1, niter + 1):
            for sampler in samplers:
                sampler.run()
            if iteration > burnin and (iteration - burnin) % thin == 0:
                for source, target in monitored:
                    target[row] = source
                row += 1
        self.wall_seconds = time.perf_counter() - started
        self.last_run = {"niter": niter, "thin": thin, "burnin": burnin, "rows": rows}
        for sampler in samplers:
            if sampler.nan_rejections:
                logger.warning(
                    "%s sampler on %s rejected %d NaN log ratio(s)",
                    sampler.kind,
                    ", ".join(sampler.target_names),
                    sampler.nan_rejections,
                )
        logger.info(
            "MCMC finished %d iteration(s) with %d sampler(s) in %.2fs", niter, len(samplers), self.wall_seconds
        )
        return self.samples

    def report(self) -> Dict:
        return {
            "samplers": [sampler.report() for sampler in self.samplers],
            "monitors": list(self.monitors),
            "wall_seconds": self.wall_seconds,
            **self.last_run,
        }


def build_mcmc(config: McmcConfiguration) -> MCMC:
    return MCMC(config)
