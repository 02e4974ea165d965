"""Model definitions: a ModelAST plus constants compiled into a node graph.

Building a definition expands loops, selects ``if`` branches against the
constants, folds constants into expressions, inserts lifted nodes for
reparameterized or expression-valued distribution parameters and sorts the
nodes topologically. Node indices equal topological positions.
"""

import enum
import hashlib
import logging
import re
from collections import ChainMap
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union

import networkx as nx
import numpy as np

from .distributions import DEFAULT_REGISTRY, Distribution, DistributionRegistry
from .errors import (
    CycleError,
    DistributionError,
    ModelDefinitionError,
    UnresolvedSymbolError,
)
from .expressions import (
    Const,
    Ref,
    Selector,
    compile_expression,
    element_name,
    evaluate,
    evaluate_index,
    is_known_function,
    make_selector,
    refs_in,
    render,
)
from .parser import (
    BinaryOp,
    Call,
    Declaration,
    ForLoop,
    IfElse,
    ModelAST,
    Number,
    UnaryOp,
    Variable,
    parse_expression,
    parse_model,
    parse_node_name,
)

logger = logging.getLogger(__name__)


class NodeKind(str, enum.Enum):
    STOCHASTIC = "stochastic"
    DETERMINISTIC = "deterministic"
    LIFTED_REPARAMETERIZATION = "lifted-reparameterization"
    LIFTED_EXPRESSION = "lifted-expression"


@dataclass(frozen=True, eq=False)
class GraphNode:
    """One node of the model graph.

    ``selector`` addresses the node's elements inside its variable's value
    array; ``log_prob_index`` is where a stochastic node's log probability
    is stored in the variable-shaped log-probability array.
    """

    index: int
    name: str
    variable: str
    selector: Selector
    kind: NodeKind
    parents: Tuple[int, ...]
    declaration: int
    size: int
    distribution: Optional[str] = None
    params: Tuple[Tuple[str, Any], ...] = ()
    expression: Any = None
    line: int = 0

    @property
    def stochastic(self) -> bool:
        return self.kind is NodeKind.STOCHASTIC

    @property
    def deterministic(self) -> bool:
        return self.kind is not NodeKind.STOCHASTIC

    @property
    def lifted(self) -> bool:
        return self.kind in (NodeKind.LIFTED_REPARAMETERIZATION, NodeKind.LIFTED_EXPRESSION)

    @property
    def log_prob_index(self) -> Tuple[int, ...]:
        return tuple(s.start if isinstance(s, slice) else s for s in self.selector)

    def param(self, name: str):
        for param_name, expr in self.params:
            if param_name == name:
                return expr
        raise KeyError(name)

    def __str__(self) -> str:
        return self.name

    def __repr__(self) -> str:
        return f"GraphNode({self.name!r}, {self.kind.value})"


@dataclass
class VariableInfo:
    name: str
    dims: Tuple[int, ...]
    node_map: np.ndarray
    lifted: bool = False

    @property
    def size(self) -> int:
        return int(np.prod(self.dims)) if self.dims else 1


NodeSpec = Union[str, GraphNode, Iterable[Union[str, GraphNode]]]

CLASSIFY_FILTERS = (
    "all",
    "stochastic",
    "deterministic",
    "lifted",
    "data",
    "nondata",
    "top",
    "latent",
    "end",
    "sink",
    "scalar",
)


class ModelDefinition:
    """Immutable node graph with structure queries.

    ``query_count`` counts structure queries (name expansion, dependency
    and classification queries); it lets callers check that run-stage code
    does no graph work.
    """

    def __init__(
        self,
        ast: ModelAST,
        nodes: Sequence[GraphNode],
        variables: Mapping[str, VariableInfo],
        constants: Mapping[str, Any],
        distributions: Mapping[str, Distribution],
    ):
        self.ast = ast
        self.nodes: Tuple[GraphNode, ...] = tuple(nodes)
        self.variables: Dict[str, VariableInfo] = dict(variables)
        self.constants: Dict[str, Any] = dict(constants)
        self.distributions: Dict[str, Distribution] = dict(distributions)
        self.query_count = 0

        self.graph = nx.DiGraph()
        self.graph.add_nodes_from(range(len(self.nodes)))
        for node in self.nodes:
            self.graph.add_edges_from((parent, node.index) for parent in node.parents)
        self._by_name = {node.name: node for node in self.nodes}
        self._children: List[Tuple[int, ...]] = [
            tuple(sorted(self.graph.successors(i))) for i in range(len(self.nodes))
        ]
        self._stochastic_parents, self._has_stochastic_dependents = self._stochastic_structure()

    # -- construction helpers ------------------------------------------------

    def _stochastic_structure(self):
        """Stochastic parents (through deterministic paths) and dependents flags."""
        upstream: List[frozenset] = []
        for node in self.nodes:
            found: Set[int] = set()
            for parent in node.parents:
                if self.nodes[parent].stochastic:
                    found.add(parent)
                else:
                    found.update(upstream[parent])
            upstream.append(frozenset(found))
        downstream = [False] * len(self.nodes)
        for node in reversed(self.nodes):
            downstream[node.index] = any(
                self.nodes[child].stochastic or downstream[child]
                for child in self._children[node.index]
            )
        return upstream, downstream

    # -- lookups -----------------------------------------------------------

    def __len__(self) -> int:
        return len(self.nodes)

    def node(self, name: Union[str, GraphNode]) -> GraphNode:
        """Look up a node by its exact canonical name."""
        if isinstance(name, GraphNode):
            return name
        try:
            return self._by_name[name]
        except KeyError:
            pass
        matches = self.expand_node_names(name)
        if len(matches) != 1:
            raise ModelDefinitionError(f"'{name}' does not name exactly one node")
        return matches[0]

    def variable_names(self, include_lifted: bool = True) -> List[str]:
        return [
            name for name, info in self.variables.items() if include_lifted or not info.lifted
        ]

    def schema(self, include_lifted: bool = True) -> Dict[str, Tuple[int, ...]]:
        return {
            name: info.dims
            for name, info in self.variables.items()
            if include_lifted or not info.lifted
        }

    def stochastic_variables(self) -> List[str]:
        return sorted({node.variable for node in self.nodes if node.stochastic})

    def lifted_nodes(self) -> List[GraphNode]:
        return [node for node in self.nodes if node.lifted]

    def get_parents(self, node: Union[str, GraphNode]) -> List[GraphNode]:
        return [self.nodes[i] for i in self.node(node).parents]

    def resolve_element(self, text: str, error=ModelDefinitionError) -> Tuple[str, Selector]:
        """Resolve ``theta[4]`` / ``y[2, 3]`` / ``x`` to (variable, selector)."""
        ref = parse_node_name(text)
        info = self.variables.get(ref.name)
        if info is None:
            raise error(f"Unknown variable '{ref.name}'")
        try:
            items = [evaluate_index(item, {}) for item in ref.indices]
        except UnresolvedSymbolError as exc:
            raise error(f"Node names must use literal indices: '{text}'") from exc
        return ref.name, make_selector(ref.name, items, info.dims, error=error)

    # -- structure queries --------------------------------------------------

    def expand_node_names(self, spec: NodeSpec) -> List[GraphNode]:
        """Map variable subsets (``theta[1:3]``, ``alpha``...) to covering nodes."""
        self.query_count += 1
        if isinstance(spec, (str, GraphNode)):
            spec = [spec]
        seen: Set[int] = set()
        result: List[GraphNode] = []
        for item in spec:
            if isinstance(item, GraphNode):
                indices = [item.index]
            else:
                variable, selector = self.resolve_element(item)
                covered = np.ravel(self.variables[variable].node_map[selector])
                indices = [int(i) for i in covered if i >= 0]
            for index in indices:
                if index not in seen:
                    seen.add(index)
                    result.append(self.nodes[index])
        return result

    def get_dependencies(
        self,
        nodes: NodeSpec,
        include_self: bool = True,
        include_data: bool = True,
        stochastic_only_terminal: bool = True,
        deterministic_only: bool = False,
        downstream: bool = False,
        data_nodes: Iterable[int] = (),
    ) -> List[GraphNode]:
        """Dependencies of ``nodes`` in topological order.

        The walk follows edges through deterministic nodes and stops at
        (including) the first stochastic node on each path. ``downstream``
        keeps walking past stochastic nodes; ``stochastic_only_terminal=False``
        makes every node terminal, so only direct children are reached.
        ``deterministic_only`` drops every stochastic node from the result,
        ``include_data=False`` drops every node in ``data_nodes``.
        """
        start = self.expand_node_names(nodes)
        data = frozenset(data_nodes)
        start_indices = {node.index for node in start}
        reached: Set[int] = set()
        frontier = list(start_indices)
        while frontier:
            current = frontier.pop()
            for child in self._children[current]:
                if child in reached:
                    continue
                reached.add(child)
                if child in start_indices:
                    continue
                if downstream:
                    frontier.append(child)
                elif stochastic_only_terminal and not self.nodes[child].stochastic:
                    frontier.append(child)
        if include_self:
            reached |= start_indices
        else:
            reached -= start_indices
        result = []
        for index in sorted(reached):
            node = self.nodes[index]
            if deterministic_only and node.stochastic:
                continue
            if not include_data and index in data:
                continue
            result.append(node)
        return result

    def classify_nodes(
        self, filters: Union[str, Sequence[str]], data_nodes: Iterable[int] = ()
    ) -> List[GraphNode]:
        """Nodes matching every filter keyword (intersection), in topological order.

        ``top``, ``latent`` and ``end`` only ever contain stochastic nodes;
        ``sink`` is any node without children, deterministic ones included.
        """
        self.query_count += 1
        if isinstance(filters, str):
            filters = [filters]
        unknown = [f for f in filters if f not in CLASSIFY_FILTERS]
        if unknown:
            raise ModelDefinitionError(
                f"Unknown node filter(s) {unknown}; expected one of {list(CLASSIFY_FILTERS)}"
            )
        data = frozenset(data_nodes)
        return [node for node in self.nodes if all(self._matches(node, f, data) for f in filters)]

    def _matches(self, node: GraphNode, keyword: str, data: frozenset) -> bool:
        index = node.index
        if keyword == "all":
            return True
        if keyword == "stochastic":
            return node.stochastic
        if keyword == "deterministic":
            return node.deterministic
        if keyword == "lifted":
            return node.lifted
        if keyword == "data":
            return index in data
        if keyword == "nondata":
            return index not in data
        if keyword == "scalar":
            return node.size == 1
        if keyword == "sink":
            return not self._children[index]
        if not node.stochastic:
            return False
        has_parents = bool(self._stochastic_parents[index])
        has_dependents = self._has_stochastic_dependents[index]
        if keyword == "top":
            return not has_parents
        if keyword == "end":
            return not has_dependents
        # latent
        return has_parents and has_dependents and index not in data

    def get_param_expr(self, node: Union[str, GraphNode], param: str):
        """The node (possibly lifted) or constant expression feeding ``param``."""
        node = self.node(node)
        if not node.stochastic:
            raise ModelDefinitionError(f"'{node.name}' is not stochastic")
        try:
            expr = node.param(param)
        except KeyError:
            spec = self.distributions[node.distribution].spec
            raise ModelDefinitionError(
                f"'{param}' is not a canonical parameter of {node.distribution}; "
                f"expected one of {list(spec.canonical)}"
            ) from None
        if isinstance(expr, Ref):
            covered = np.unique(np.ravel(self.variables[expr.variable].node_map[expr.selector]))
            if len(covered) == 1:
                parent = self.nodes[int(covered[0])]
                if parent.variable == expr.variable and parent.selector == expr.selector:
                    return parent
        return expr

    def topological_order(self) -> List[GraphNode]:
        return list(self.nodes)

    def describe(self, node: Union[str, GraphNode]) -> str:
        node = self.node(node)
        if node.stochastic:
            params = ", ".join(f"{name} = {render(expr)}" for name, expr in node.params)
            return f"{node.name} ~ {node.distribution}({params})"
        return f"{node.name} <- {render(node.expression)}"


# ---------------------------------------------------------------------------
# Builder
# ---------------------------------------------------------------------------


@dataclass
class _Instance:
    declaration: int
    line: int
    variable: str
    items: Tuple[Any, ...]
    statement: Declaration
    loop_env: Dict[str, int]


@dataclass
class _PendingNode:
    name: str
    variable: str
    selector: Selector
    kind: NodeKind
    declaration: int
    sort_key: Tuple
    size: int
    line: int
    distribution: Optional[str] = None
    params: Tuple[Tuple[str, Any], ...] = ()
    expression: Any = None
    parents: Tuple[int, ...] = ()


_SLUG_REPLACEMENTS = (
    ("/", "_over_"),
    ("*", "_times_"),
    ("+", "_plus_"),
    ("-", "_minus_"),
    ("^", "_pow_"),
    ("[", "_"),
    ("]", ""),
    (",", "_"),
    (":", "to"),
    (".", "p"),
)


def _lifted_slug(text: str) -> str:
    slug = text.replace(" ", "").replace("(", "").replace(")", "")
    for old, new in _SLUG_REPLACEMENTS:
        slug = slug.replace(old, new)
    slug = re.sub(r"[^A-Za-z0-9_]", "_", slug)
    return re.sub(r"_+", "_", slug).strip("_")


def _normalize_constant(value):
    if np.ndim(value) == 0:
        return float(value)
    return np.asarray(value, dtype=float)


class _Builder:
    def __init__(
        self,
        ast: ModelAST,
        constants: Mapping[str, Any],
        registry: DistributionRegistry,
    ):
        self.ast = ast
        self.constants = {name: _normalize_constant(v) for name, v in constants.items()}
        self.registry = registry
        self.instances: List[_Instance] = []
        self.variables: Dict[str, VariableInfo] = {}
        self.pending: List[_PendingNode] = []
        self.zero_values: Dict[str, np.ndarray] = {}
        self.lifted_by_text: Dict[str, int] = {}
        self.distributions: Dict[str, Distribution] = {}
        self._numbers: Dict[int, int] = {}

    # -- pass 1: expand loops and branches ---------------------------------

    def collect(self, statements, loop_env: Dict[str, int]) -> None:
        for statement in statements:
            if isinstance(statement, Declaration):
                number = self._declaration_number(statement)
                scope = ChainMap(loop_env, self.constants)
                try:
                    items = tuple(evaluate_index(i, scope) for i in statement.target.indices)
                except UnresolvedSymbolError as exc:
                    raise self._index_error(exc, statement) from exc
                self.instances.append(
                    _Instance(number, statement.line, statement.target.name, items, statement, dict(loop_env))
                )
            elif isinstance(statement, ForLoop):
                scope = ChainMap(loop_env, self.constants)
                try:
                    start = int(evaluate(statement.start, scope))
                    end = int(evaluate(statement.end, scope))
                except UnresolvedSymbolError as exc:
                    raise UnresolvedSymbolError(
                        exc.symbol, f"bounds of loop over '{statement.var}'"
                    ) from exc
                for value in range(start, end + 1):
                    self.collect(statement.body, {**loop_env, statement.var: value})
            elif isinstance(statement, IfElse):
                scope = ChainMap(loop_env, self.constants)
                try:
                    condition = evaluate(statement.condition, scope)
                except UnresolvedSymbolError as exc:
                    raise UnresolvedSymbolError(
                        exc.symbol, "if-condition (conditions must use constants only)"
                    ) from exc
                self.collect(statement.then_body if bool(condition) else statement.else_body, loop_env)

    def _declaration_number(self, statement: Declaration) -> int:
        # Declarations are numbered by first appearance in program order.
        key = id(statement)
        if key not in self._numbers:
            self._numbers[key] = len(self._numbers)
        return self._numbers[key]

    def _index_error(self, exc: UnresolvedSymbolError, statement: Declaration) -> ModelDefinitionError:
        if exc.symbol in self._declared_names():
            return ModelDefinitionError(
                f"line {statement.line}: stochastic indexing is not supported "
                f"('{exc.symbol}' used in an index)"
            )
        return UnresolvedSymbolError(exc.symbol, f"index of '{statement.target.name}' (line {statement.line})")

    def _declared_names(self) -> Set[str]:
        names: Set[str] = set()

        def walk(statements):
            for statement in statements:
                if isinstance(statement, Declaration):
                    names.add(statement.target.name)
                elif isinstance(statement, ForLoop):
                    walk(statement.body)
                elif isinstance(statement, IfElse):
                    walk(statement.then_body)
                    walk(statement.else_body)

        walk(self.ast.declarations)
        return names

    # -- pass 2: variables and coverage --------------------------------------

    def size_variables(self) -> None:
        extents: Dict[str, List[int]] = {}
        for instance in self.instances:
            his = [item[1] if isinstance(item, tuple) else item for item in instance.items]
            if instance.variable in self.constants:
                raise ModelDefinitionError(
                    f"line {instance.line}: '{instance.variable}' is declared in the model and "
                    "cannot also be a constant; supply it as data instead"
                )
            if instance.variable not in extents:
                extents[instance.variable] = his
                continue
            current = extents[instance.variable]
            if len(current) != len(his):
                raise ModelDefinitionError(
                    f"line {instance.line}: '{instance.variable}' is declared with "
                    f"{len(his)} index(es) here but {len(current)} elsewhere"
                )
            extents[instance.variable] = [max(a, b) for a, b in zip(current, his)]
        for name, dims in extents.items():
            dims = tuple(dims)
            self.variables[name] = VariableInfo(name, dims, np.full(dims, -1, dtype=np.int64))
            self.zero_values[name] = np.zeros(dims)

    def cover(self, instance: _Instance, selector: Selector, node_id: int) -> None:
        node_map = self.variables[instance.variable].node_map
        if np.any(node_map[selector] >= 0):
            raise ModelDefinitionError(
                f"line {instance.line}: element(s) of "
                f"{element_name(instance.variable, instance.items)} are declared more than once"
            )
        node_map[selector] = node_id

    # -- pass 3: resolve right-hand sides -----------------------------------

    def resolve(self, expr, loop_env: Mapping[str, int], where: str):
        if isinstance(expr, Number):
            return Const(expr.value)
        if isinstance(expr, Variable):
            return self._resolve_variable(expr, loop_env, where)
        if isinstance(expr, UnaryOp):
            return self._fold(UnaryOp(expr.op, self.resolve(expr.operand, loop_env, where)))
        if isinstance(expr, BinaryOp):
            return self._fold(
                BinaryOp(
                    expr.op,
                    self.resolve(expr.left, loop_env, where),
                    self.resolve(expr.right, loop_env, where),
                )
            )
        if isinstance(expr, Call):
            if not is_known_function(expr.function):
                raise ModelDefinitionError(f"Unknown function '{expr.function}' in {where}")
            args = tuple(self.resolve(arg, loop_env, where) for arg in expr.args)
            return self._fold(Call(expr.function, args))
        raise ModelDefinitionError(f"Unsupported expression in {where}")

    def _resolve_variable(self, expr: Variable, loop_env, where: str):
        name = expr.name
        if name in loop_env and not expr.indices:
            return Const(float(loop_env[name]))
        scope = ChainMap(loop_env, self.constants)
        if name in self.variables:
            try:
                items = [evaluate_index(item, scope) for item in expr.indices]
            except UnresolvedSymbolError as exc:
                if exc.symbol in self.variables:
                    raise ModelDefinitionError(
                        f"Stochastic indexing is not supported ('{exc.symbol}' in {where})"
                    ) from exc
                raise UnresolvedSymbolError(exc.symbol, where) from exc
            info = self.variables[name]
            selector = make_selector(name, items, info.dims)
            text = element_name(name, items) if items else name
            return Ref(name, selector, text)
        if name in self.constants:
            try:
                return Const(evaluate(expr, scope))
            except UnresolvedSymbolError as exc:
                raise UnresolvedSymbolError(exc.symbol, where) from exc
        raise UnresolvedSymbolError(name, where)

    @staticmethod
    def _fold(expr):
        children = (
            [expr.operand]
            if isinstance(expr, UnaryOp)
            else [expr.left, expr.right]
            if isinstance(expr, BinaryOp)
            else list(expr.args)
        )
        if all(isinstance(child, Const) for child in children):
            with np.errstate(all="ignore"):
                return Const(evaluate(expr, {}))
        return expr

    def _substitute(self, expr, given: Mapping[str, Any]):
        """Splice resolved parameter expressions into a transform expression."""
        if isinstance(expr, Number):
            return Const(expr.value)
        if isinstance(expr, Variable):
            return given[expr.name]
        if isinstance(expr, UnaryOp):
            return self._fold(UnaryOp(expr.op, self._substitute(expr.operand, given)))
        if isinstance(expr, BinaryOp):
            return self._fold(
                BinaryOp(expr.op, self._substitute(expr.left, given), self._substitute(expr.right, given))
            )
        if isinstance(expr, Call):
            return self._fold(Call(expr.function, tuple(self._substitute(a, given) for a in expr.args)))
        raise TypeError(expr)

    def _shape_of(self, expr) -> Tuple[int, ...]:
        with np.errstate(all="ignore"):
            return np.shape(compile_expression(expr, self.zero_values)())

    # -- pass 4: node creation ---------------------------------------------

    def create_nodes(self) -> None:
        for instance in self.instances:
            info = self.variables[instance.variable]
            selector = make_selector(instance.variable, instance.items, info.dims)
            name = element_name(instance.variable, instance.items)
            size = int(np.prod(np.shape(self.zero_values[instance.variable][selector])))
            node_id = len(self.pending)
            self.cover(instance, selector, node_id)
            element_key = tuple(item[0] if isinstance(item, tuple) else item for item in instance.items)
            self.pending.append(
                _PendingNode(
                    name=name,
                    variable=instance.variable,
                    selector=selector,
                    kind=NodeKind.STOCHASTIC if instance.statement.stochastic else NodeKind.DETERMINISTIC,
                    declaration=instance.declaration,
                    sort_key=(instance.declaration, 0, element_key, name),
                    size=size,
                    line=instance.line,
                )
            )
        # Right-hand sides need the full coverage map, so resolve afterwards.
        for instance, node in zip(list(self.instances), list(self.pending)):
            where = f"declaration of '{node.name}' (line {instance.line})"
            if instance.statement.stochastic:
                self._stochastic(instance, node, where)
            else:
                node.expression = self.resolve(instance.statement.rhs, instance.loop_env, where)
                target_shape = np.shape(self.zero_values[node.variable][node.selector])
                value_shape = self._shape_of(node.expression)
                try:
                    np.broadcast_shapes(value_shape, target_shape)
                except ValueError:
                    raise ModelDefinitionError(
                        f"{where}: value of shape {value_shape} does not fit {target_shape}"
                    ) from None

    def _stochastic(self, instance: _Instance, node: _PendingNode, where: str) -> None:
        call = instance.statement.rhs
        try:
            distribution = self.registry.get(call.name)
        except DistributionError as exc:
            raise ModelDefinitionError(f"{where}: {exc}") from exc
        spec = distribution.spec
        self.distributions[spec.name] = distribution
        if node.size > 1 and not spec.multivariate:
            raise ModelDefinitionError(
                f"{where}: {spec.name} is a scalar distribution but '{node.name}' has {node.size} elements"
            )
        given: Dict[str, Any] = {}
        positional = [arg for arg in call.args if arg.name is None]
        if len(positional) > len(spec.positional_names):
            raise ModelDefinitionError(
                f"{where}: {spec.name} takes at most {len(spec.positional_names)} "
                f"positional argument(s), got {len(positional)}"
            )
        for param_name, arg in zip(spec.positional_names, positional):
            given[param_name] = self.resolve(arg.value, instance.loop_env, where)
        for arg in call.args:
            if arg.name is None:
                continue
            if arg.name in given:
                raise ModelDefinitionError(f"{where}: parameter '{arg.name}' given twice")
            given[arg.name] = self.resolve(arg.value, instance.loop_env, where)
        try:
            parameterization = self.registry.match_parameterization(spec.name, given)
        except DistributionError as exc:
            raise ModelDefinitionError(f"{where}: {exc}") from exc

        params = []
        for canonical_name in spec.canonical:
            if canonical_name in given:
                expr, kind = given[canonical_name], NodeKind.LIFTED_EXPRESSION
            else:
                transform = parse_expression(parameterization.transform_for(canonical_name))
                expr, kind = self._substitute(transform, given), NodeKind.LIFTED_REPARAMETERIZATION
            if not isinstance(expr, (Const, Ref)):
                expr = self._lift(expr, kind, node, where)
            params.append((canonical_name, expr))
        node.distribution = spec.name
        node.params = tuple(params)

    def _lift(self, expr, kind: NodeKind, requester: _PendingNode, where: str) -> Ref:
        text = render(expr)
        if text in self.lifted_by_text:
            lifted = self.pending[self.lifted_by_text[text]]
            return Ref(lifted.variable, lifted.selector, lifted.name)
        slug = _lifted_slug(text)
        variable = f"lifted_{slug}"
        if len(slug) > 48 or variable in self.variables or variable in self.constants:
            digest = hashlib.sha1(text.encode("utf-8")).hexdigest()[:8]
            variable = f"lifted_{slug[:40]}_{digest}"
        dims = self._shape_of(expr)
        node_map = np.full(dims, -1, dtype=np.int64)
        self.variables[variable] = VariableInfo(variable, dims, node_map, lifted=True)
        self.zero_values[variable] = np.zeros(dims)
        selector = tuple(slice(0, extent) for extent in dims)
        name = element_name(variable, [(1, extent) for extent in dims])
        node_id = len(self.pending)
        node_map[selector] = node_id
        self.pending.append(
            _PendingNode(
                name=name,
                variable=variable,
                selector=selector,
                kind=kind,
                declaration=requester.declaration,
                sort_key=(requester.declaration, -1, (), name),
                size=int(np.prod(dims)) if dims else 1,
                line=requester.line,
                expression=expr,
            )
        )
        self.lifted_by_text[text] = node_id
        logger.debug("Inserted lifted node %s <- %s for %s", name, text, where)
        return Ref(variable, selector, name)

    # -- pass 5: edges, sort and freeze -------------------------------------

    def link(self) -> None:
        for node in self.pending:
            exprs = [expr for _, expr in node.params] if node.params else [node.expression]
            parents: List[int] = []
            for expr in exprs:
                for ref in refs_in(expr):
                    covered = np.ravel(self.variables[ref.variable].node_map[ref.selector])
                    if np.any(covered < 0):
                        raise UnresolvedSymbolError(
                            ref.text, f"declaration of '{node.name}' (line {node.line}); it is never declared"
                        )
                    for parent in covered:
                        if int(parent) not in parents:
                            parents.append(int(parent))
            node.parents = tuple(parents)

    def freeze(self) -> ModelDefinition:
        graph = nx.DiGraph()
        graph.add_nodes_from(range(len(self.pending)))
        for index, node in enumerate(self.pending):
            graph.add_edges_from((parent, index) for parent in node.parents)
        if not nx.is_directed_acyclic_graph(graph):
            cycle = nx.find_cycle(graph)
            path = [self.pending[cycle[0][0]].name] + [self.pending[v].name for _, v in cycle]
            raise CycleError(path)
        order = list(
            nx.lexicographical_topological_sort(graph, key=lambda i: self.pending[i].sort_key)
        )
        position = np.empty(len(order), dtype=np.int64)
        for new_index, old_index in enumerate(order):
            position[old_index] = new_index
        for info in self.variables.values():
            covered = info.node_map >= 0
            info.node_map[covered] = position[info.node_map[covered]]
        nodes = []
        for new_index, old_index in enumerate(order):
            pending = self.pending[old_index]
            nodes.append(
                GraphNode(
                    index=new_index,
                    name=pending.name,
                    variable=pending.variable,
                    selector=pending.selector,
                    kind=pending.kind,
                    parents=tuple(int(position[p]) for p in pending.parents),
                    declaration=pending.declaration,
                    size=pending.size,
                    distribution=pending.distribution,
                    params=pending.params,
                    expression=pending.expression,
                    line=pending.line,
                )
            )
        return ModelDefinition(self.ast, nodes, self.variables, self.constants, self.distributions)


def build_model_definition(
    ast: Union[ModelAST, str],
    constants: Optional[Mapping[str, Any]] = None,
    registry: Optional[DistributionRegistry] = None,
) -> ModelDefinition:
    """Compile a ModelAST (or model text) and constants into a ModelDefinition."""
    if isinstance(ast, str):
        ast = parse_model(ast)
    builder = _Builder(ast, constants or {}, registry or DEFAULT_REGISTRY)
    builder.collect(ast.declarations, {})
    builder.size_variables()
    builder.create_nodes()
    builder.link()
    definition = builder.freeze()
    logger.info(
        "Built model definition: %d nodes (%d lifted), %d variables",
        len(definition.nodes),
        len(definition.lifted_nodes()),
        len(definition.variables),
    )
    return definition
