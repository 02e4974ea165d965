"""Runtime model: variable values, stored log probabilities and node operations."""

import logging
import math
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np

from .definition import GraphNode, ModelDefinition, NodeSpec
from .errors import ModelError
from .expressions import compile_expression

logger = logging.getLogger(__name__)


class _NodeKernel:
    """Compiled calculate/simulate functions for one node."""

    __slots__ = ("node", "calculate", "calculate_diff", "simulate", "stored")

    def __init__(self, node: GraphNode, model: "Model"):
        self.node = node
        values = model.values[node.variable]
        selector = node.selector
        if node.deterministic:
            compute = compile_expression(node.expression, model.values)

            def calculate():
                values[selector] = compute()
                return 0.0

            self.calculate = calculate
            self.calculate_diff = calculate
            self.simulate = calculate
            self.stored = lambda: 0.0
            return

        distribution = model.definition.distributions[node.distribution]
        params = [compile_expression(expr, model.values) for _, expr in node.params]
        log_probs = model.log_probs[node.variable]
        index = node.log_prob_index
        log_prob = distribution.log_prob
        valid = distribution.spec.valid
        simulate_fn = distribution.simulate_fn
        rng = model.rng

        def calculate():
            lp = float(log_prob(values[selector], [p() for p in params]))
            log_probs[index] = lp
            return lp

        def calculate_diff():
            old = log_probs[index]
            lp = float(log_prob(values[selector], [p() for p in params]))
            log_probs[index] = lp
            return lp - old

        def simulate():
            args = [p() for p in params]
            if valid is not None and not np.all(valid(*args)):
                raise ModelError(f"Cannot simulate '{node.name}': invalid parameters {args}")
            values[selector] = simulate_fn(rng, *args)

        self.calculate = calculate
        self.calculate_diff = calculate_diff
        self.simulate = simulate
        self.stored = lambda: float(log_probs[index])


class Model:
    """A runtime instance of a ModelDefinition.

    Values live in one float array per variable (0-d for scalars) and are
    mutated in place; compiled node functions hold references to them.
    Stored log probabilities use a variable-shaped array per variable that
    has stochastic nodes, one entry per node.

    Args:
        definition: The model graph.
        data: Observed values by variable; NaN elements stay unobserved.
        inits: Initial values by variable for non-data stochastic nodes.
        seed: Seed for the model's random generator.
        rng: An explicit generator, overriding ``seed``.
    """

    def __init__(
        self,
        definition: ModelDefinition,
        data: Optional[Mapping[str, Any]] = None,
        inits: Optional[Mapping[str, Any]] = None,
        seed: Optional[int] = None,
        rng: Optional[np.random.Generator] = None,
    ):
        self.definition = definition
        self.rng = rng if rng is not None else np.random.default_rng(seed)
        self.values: Dict[str, np.ndarray] = {
            name: np.zeros(info.dims) for name, info in definition.variables.items()
        }
        self.log_probs: Dict[str, np.ndarray] = {
            name: np.zeros(definition.variables[name].dims)
            for name in definition.stochastic_variables()
        }
        self.data_flags = np.zeros(len(definition.nodes), dtype=bool)
        self._kernels = [_NodeKernel(node, self) for node in definition.nodes]
        self._initialize(data or {}, inits or {})

    # -- initialization ------------------------------------------------------

    def _conform(self, name: str, value, role: str) -> np.ndarray:
        info = self.definition.variables.get(name)
        if info is None or info.lifted:
            raise ModelError(f"{role} given for undeclared variable '{name}'")
        array = np.asarray(value, dtype=float)
        if array.shape != info.dims:
            if array.size == info.size and (not info.dims or array.ndim <= 1):
                array = array.reshape(info.dims)
            else:
                raise ModelError(
                    f"{role} for '{name}' has shape {array.shape}; expected {info.dims}"
                )
        return array

    def _observe(self, data: Mapping[str, Any]) -> None:
        """Set data values and flags; a node of a named variable is data iff none of its elements is NaN."""
        arrays = {name: self._conform(name, value, "Data") for name, value in data.items()}
        flags = self.data_flags.copy()
        for name, array in arrays.items():
            mask = ~np.isnan(array)
            node_map = self.definition.variables[name].node_map
            for index in np.unique(node_map[node_map >= 0]):
                node = self.definition.nodes[int(index)]
                node_mask = mask[node.selector]
                if not np.any(node_mask):
                    flags[node.index] = False
                elif node.deterministic:
                    raise ModelError(f"'{node.name}' is deterministic and cannot be data")
                elif not np.all(node_mask):
                    raise ModelError(f"'{node.name}' is only partially observed")
                else:
                    flags[node.index] = True
        for name, array in arrays.items():
            self.values[name][...] = np.where(np.isnan(array), self.values[name], array)
        self.data_flags[...] = flags

    def _initialize(self, data: Mapping[str, Any], inits: Mapping[str, Any]) -> None:
        self._observe(data)

        initialized = np.zeros(len(self.definition.nodes), dtype=bool)
        for name, value in inits.items():
            array = self._conform(name, value, "Inits")
            node_map = self.definition.variables[name].node_map
            for node_index in np.unique(node_map[node_map >= 0]):
                node = self.definition.nodes[int(node_index)]
                if node.deterministic or self.data_flags[node.index]:
                    continue
                block = array[node.selector]
                if not np.any(np.isnan(block)):
                    self.values[name][node.selector] = block
                    initialized[node.index] = True

        for node, kernel in zip(self.definition.nodes, self._kernels):
            if node.deterministic:
                kernel.calculate()
            elif not self.data_flags[node.index] and not initialized[node.index]:
                try:
                    with np.errstate(all="ignore"):
                        kernel.simulate()
                except (ModelError, ValueError) as exc:
                    raise ModelError(
                        f"Cannot initialize '{node.name}' by simulation; supply inits ({exc})"
                    ) from exc

        self.calculate()
        for node in self.definition.nodes:
            if node.stochastic:
                lp = self.log_probs[node.variable][node.log_prob_index]
                if math.isnan(lp) or lp == -math.inf:
                    raise ModelError(
                        f"Initial state has log probability {lp} at '{node.name}' "
                        f"(value {self.node_value(node)})"
                    )
        logger.debug(
            "Model initialized: %d data node(s), total log probability %.6g",
            int(self.data_flags.sum()),
            self.get_log_prob(),
        )

    # -- node sequences ------------------------------------------------------

    def _nodes(self, nodes: Optional[NodeSpec]) -> Sequence[GraphNode]:
        if nodes is None:
            return self.definition.nodes
        if isinstance(nodes, (list, tuple)) and all(isinstance(n, GraphNode) for n in nodes):
            return nodes
        return self.definition.expand_node_names(nodes)

    def calculate(self, nodes: Optional[NodeSpec] = None) -> float:
        """Recompute values and log probabilities; returns the summed log probability."""
        kernels = self._kernels
        total = 0.0
        with np.errstate(all="ignore"):
            for node in self._nodes(nodes):
                total += kernels[node.index].calculate()
        return total

    def calculate_diff(self, nodes: Optional[NodeSpec] = None) -> float:
        """As calculate, but returns the change against the previously stored values."""
        kernels = self._kernels
        total = 0.0
        with np.errstate(all="ignore"):
            for node in self._nodes(nodes):
                total += kernels[node.index].calculate_diff()
        return total

    def simulate(self, nodes: Optional[NodeSpec] = None, include_data: bool = False) -> None:
        """Draw stochastic nodes and recompute deterministic ones.

        Stored log probabilities are left untouched.
        """
        kernels = self._kernels
        flags = self.data_flags
        with np.errstate(all="ignore"):
            for node in self._nodes(nodes):
                if node.stochastic and flags[node.index] and not include_data:
                    continue
                kernels[node.index].simulate()

    def get_log_prob(self, nodes: Optional[NodeSpec] = None) -> float:
        kernels = self._kernels
        return float(sum(kernels[node.index].stored() for node in self._nodes(nodes)))

    # -- value access --------------------------------------------------------

    def node_value(self, node: GraphNode):
        return self.values[node.variable][node.selector]

    def get_value(self, spec: str):
        variable, selector = self.definition.resolve_element(spec, error=ModelError)
        value = self.values[variable][selector]
        return float(value) if np.ndim(value) == 0 else np.array(value)

    def set_value(self, spec: str, value) -> None:
        variable, selector = self.definition.resolve_element(spec, error=ModelError)
        target = self.values[variable][selector]
        value = np.asarray(value, dtype=float)
        if value.size != np.size(target):
            raise ModelError(f"Cannot assign {value.size} value(s) to '{spec}'")
        self.values[variable][selector] = value.reshape(np.shape(target))

    def __getitem__(self, spec: str):
        return self.get_value(spec)

    def __setitem__(self, spec: str, value) -> None:
        self.set_value(spec, value)

    # -- data -----------------------------------------------------------------

    def set_data(self, data: Mapping[str, Any]) -> None:
        """Replace the observed values of every variable named in ``data``.

        NaN elements become unobserved; variables not named keep their data.
        Deterministic nodes and stored log probabilities are recomputed.
        Sampler configurations and algorithms built before the change keep
        the node sets they were built with, so build them afterwards.
        """
        self._observe(data)
        self.calculate()
        logger.debug("Data replaced for %s: %d data node(s)", ", ".join(data), int(self.data_flags.sum()))

    def reset_data(self, variables: Optional[Sequence[str]] = None) -> None:
        """Unmark the data nodes of ``variables`` (all variables when omitted); values are kept."""
        if variables is None:
            self.data_flags[...] = False
        else:
            for name in [variables] if isinstance(variables, str) else variables:
                info = self.definition.variables.get(name)
                if info is None:
                    raise ModelError(f"Cannot reset data of undeclared variable '{name}'")
                self.data_flags[info.node_map[info.node_map >= 0]] = False
        self.calculate()

    # -- structure queries with the model's data flags -------------------------

    @property
    def data_nodes(self) -> frozenset:
        return frozenset(int(i) for i in np.flatnonzero(self.data_flags))

    def is_data(self, node: Union[str, GraphNode]) -> bool:
        return bool(self.data_flags[self.definition.node(node).index])

    def expand_node_names(self, spec: NodeSpec) -> List[GraphNode]:
        return self.definition.expand_node_names(spec)

    def get_dependencies(self, nodes: NodeSpec, **options) -> List[GraphNode]:
        return self.definition.get_dependencies(nodes, data_nodes=self.data_nodes, **options)

    def classify_nodes(self, filters: Union[str, Sequence[str]]) -> List[GraphNode]:
        return self.definition.classify_nodes(filters, data_nodes=self.data_nodes)


def new_model(
    definition: ModelDefinition,
    data: Optional[Mapping[str, Any]] = None,
    inits: Optional[Mapping[str, Any]] = None,
    seed: Optional[int] = None,
) -> Model:
    return Model(definition, data=data, inits=inits, seed=seed)
