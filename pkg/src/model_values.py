"""ModelValues containers and the copy primitive between models and containers."""

import itertools
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .definition import GraphNode, ModelDefinition
from .errors import ModelError
from .expressions import element_name
from .model import Model


LOG_PROB_PREFIX = "logProb_"


def log_prob_name(variable: str) -> str:
    return f"{LOG_PROB_PREFIX}{variable}"


class ModelValues:
    """Rows of model-variable values, each variable an array of shape (rows, *dims).

    Rows are numbered from 1 in every public method.
    """

    def __init__(
        self,
        schema: Mapping[str, Sequence[int]],
        rows: int = 0,
        definition: Optional[ModelDefinition] = None,
    ):
        if rows < 0:
            raise ModelError(f"Row count must be non-negative, got {rows}")
        self.schema: Dict[str, Tuple[int, ...]] = {name: tuple(dims) for name, dims in schema.items()}
        self.definition = definition
        self.arrays: Dict[str, np.ndarray] = {
            name: np.zeros((rows,) + dims) for name, dims in self.schema.items()
        }
        self._rows = rows

    @classmethod
    def from_definition(
        cls,
        definition: ModelDefinition,
        rows: int = 0,
        log_prob: bool = False,
        variables: Optional[Iterable[str]] = None,
    ) -> "ModelValues":
        """Container whose schema mirrors (a subset of) the model's variables."""
        full = definition.schema()
        names = list(full) if variables is None else list(variables)
        unknown = [name for name in names if name not in full]
        if unknown:
            raise ModelError(f"Unknown variable(s) {unknown}")
        schema = {name: full[name] for name in names}
        if log_prob:
            for name in definition.stochastic_variables():
                if name in schema:
                    schema[log_prob_name(name)] = full[name]
        return cls(schema, rows, definition=definition)

    def __len__(self) -> int:
        return self._rows

    @property
    def rows(self) -> int:
        return self._rows

    def __getitem__(self, variable: str) -> np.ndarray:
        try:
            return self.arrays[variable]
        except KeyError:
            raise ModelError(f"'{variable}' is not in this ModelValues schema") from None

    def __contains__(self, variable: str) -> bool:
        return variable in self.arrays

    def resize(self, rows: int) -> None:
        """Grow or shrink to ``rows``; existing rows are kept."""
        if rows < 0:
            raise ModelError(f"Row count must be non-negative, got {rows}")
        for name, array in self.arrays.items():
            resized = np.zeros((rows,) + self.schema[name])
            keep = min(rows, self._rows)
            resized[:keep] = array[:keep]
            self.arrays[name] = resized
        self._rows = rows

    def check_row(self, row: int) -> int:
        if not 1 <= row <= self._rows:
            raise ModelError(f"Row {row} out of range 1..{self._rows}")
        return row - 1

    def row(self, row: int) -> Dict[str, np.ndarray]:
        index = self.check_row(row)
        return {name: array[index].copy() for name, array in self.arrays.items()}

    # -- tabular form --------------------------------------------------------

    def columns(self, variables: Optional[Iterable[str]] = None) -> List[Tuple[str, str, Tuple[int, ...]]]:
        """(column name, variable, 0-based element index) in row-major element order."""
        names = list(self.schema) if variables is None else list(variables)
        result = []
        for name in names:
            dims = self.schema[name]
            if not dims:
                result.append((name, name, ()))
                continue
            for index in itertools.product(*(range(extent) for extent in dims)):
                result.append((element_name(name, [i + 1 for i in index]), name, index))
        return result

    def to_frame(self, variables: Optional[Iterable[str]] = None) -> pd.DataFrame:
        data = {
            column: self.arrays[name][(slice(None),) + index]
            for column, name, index in self.columns(variables)
        }
        return pd.DataFrame(data, index=pd.RangeIndex(1, self._rows + 1, name="row"))

    def to_csv(self, path: Union[str, Path], variables: Optional[Iterable[str]] = None) -> None:
        self.to_frame(variables).to_csv(path, index=False, float_format="%.17g")

    @classmethod
    def from_frame(
        cls,
        frame: pd.DataFrame,
        schema: Mapping[str, Sequence[int]],
        definition: Optional[ModelDefinition] = None,
    ) -> "ModelValues":
        values = cls(schema, len(frame), definition=definition)
        for column, name, index in values.columns():
            if column not in frame.columns:
                raise ModelError(f"Column '{column}' missing from the sample table")
            values.arrays[name][(slice(None),) + index] = frame[column].to_numpy(dtype=float)
        return values

    @classmethod
    def from_csv(
        cls,
        path: Union[str, Path],
        schema: Mapping[str, Sequence[int]],
        definition: Optional[ModelDefinition] = None,
    ) -> "ModelValues":
        return cls.from_frame(pd.read_csv(path), schema, definition=definition)


Storage = Union[Model, ModelValues]


def _definition_of(*stores: Storage) -> Optional[ModelDefinition]:
    for store in stores:
        if store.definition is not None:
            return store.definition
    return None


def _value_arrays(store: Storage) -> Dict[str, np.ndarray]:
    return store.values if isinstance(store, Model) else store.arrays


def _log_prob_array(store: Storage, variable: str) -> Optional[np.ndarray]:
    if isinstance(store, Model):
        return store.log_probs.get(variable)
    return store.arrays.get(log_prob_name(variable))


def _dims(store: Storage, variable: str) -> Optional[Tuple[int, ...]]:
    arrays = _value_arrays(store)
    if variable not in arrays:
        return None
    shape = arrays[variable].shape
    return shape if isinstance(store, Model) else shape[1:]


def make_copier(
    source: Storage,
    target: Storage,
    nodes: Union[str, Sequence[Union[str, GraphNode]]],
    log_prob: bool = False,
) -> Callable[[int, int], None]:
    """Pre-resolve a copy of ``nodes`` into a function of (row_from, row_to).

    Rows are ignored for a Model side. Schema checks happen here, once.
    """
    definition = _definition_of(source, target)
    if definition is None:
        raise ModelError("copy needs a model or a ModelValues built from a definition")
    if isinstance(nodes, (list, tuple)) and all(isinstance(n, GraphNode) for n in nodes):
        resolved = list(nodes)
    else:
        resolved = definition.expand_node_names(nodes)

    plan = []
    for node in resolved:
        source_dims, target_dims = _dims(source, node.variable), _dims(target, node.variable)
        if source_dims is None or target_dims is None:
            raise ModelError(f"Variable '{node.variable}' of '{node.name}' is missing from a copy schema")
        if source_dims != target_dims:
            raise ModelError(
                f"Variable '{node.variable}' has dimensions {source_dims} and {target_dims} in the copy schemas"
            )
        entry = [
            _value_arrays(source)[node.variable],
            _value_arrays(target)[node.variable],
            node.selector,
        ]
        plan.append(entry)
        if log_prob and node.stochastic:
            source_lp = _log_prob_array(source, node.variable)
            target_lp = _log_prob_array(target, node.variable)
            if source_lp is None or target_lp is None:
                raise ModelError(f"Log probabilities for '{node.variable}' are missing from a copy schema")
            plan.append([source_lp, target_lp, node.log_prob_index])

    source_is_model = isinstance(source, Model)
    target_is_model = isinstance(target, Model)

    def copy_rows(row_from: int = 1, row_to: int = 1) -> None:
        source_prefix = () if source_is_model else (source.check_row(row_from),)
        target_prefix = () if target_is_model else (target.check_row(row_to),)
        for source_array, target_array, selector in plan:
            target_array[target_prefix + selector] = source_array[source_prefix + selector]

    if source_is_model and target_is_model:
        return copy_rows
    return _guard_resize(copy_rows, source, target)


def _guard_resize(copy_rows, source, target):
    """A prepared copy holds array references; resizing a container invalidates them."""
    stores = [s for s in (source, target) if isinstance(s, ModelValues)]
    rows_seen = [len(s) for s in stores]

    def refreshed(row_from: int = 1, row_to: int = 1) -> None:
        if any(len(s) != seen for s, seen in zip(stores, rows_seen)):
            raise ModelError("ModelValues was resized after this copy was prepared")
        copy_rows(row_from, row_to)

    return refreshed


def copy(
    source: Storage,
    target: Storage,
    nodes: Union[str, Sequence[Union[str, GraphNode]]],
    row_from: int = 1,
    row_to: int = 1,
    log_prob: bool = False,
) -> None:
    """Copy the values of ``nodes`` (and optionally their log probabilities)."""
    make_copier(source, target, nodes, log_prob=log_prob)(row_from, row_to)


def new_model_values(
    schema: Union[ModelDefinition, Mapping[str, Sequence[int]]],
    rows: int = 0,
    log_prob: bool = False,
) -> ModelValues:
    if isinstance(schema, ModelDefinition):
        return ModelValues.from_definition(schema, rows, log_prob=log_prob)
    return ModelValues(schema, rows)
