"""Expression evaluation for model code.

Two forms are handled here:

* parser expressions evaluated against a plain environment (constants,
  loop indices), used while the graph is being built;
* resolved expressions, whose leaves are ``Const`` values and ``Ref``
  element references into model variables. These are compiled once into
  closures over the variable arrays and then called repeatedly.
"""

import operator
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Sequence, Tuple, Type, Union

import numpy as np
from scipy.special import expit, gammaln, logit, ndtr, ndtri

from .errors import BugsError, ModelDefinitionError, UnresolvedSymbolError
from .parser import (
    BinaryOp,
    Call,
    Number,
    Range,
    UnaryOp,
    Variable,
    deparse_expression,
    format_number,
)

Selector = Tuple[Union[int, slice], ...]


def _step(x):
    return np.where(np.asarray(x) >= 0, 1.0, 0.0)


def _equals(a, b):
    return np.where(np.asarray(a) == np.asarray(b), 1.0, 0.0)


def _cloglog(p):
    return np.log(-np.log1p(-p))


def _icloglog(x):
    return -np.expm1(-np.exp(x))


ELEMENTWISE_FUNCTIONS = {
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "pow": np.power,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "logit": logit,
    "ilogit": expit,
    "expit": expit,
    "phi": ndtr,
    "probit": ndtri,
    "cloglog": _cloglog,
    "icloglog": _icloglog,
    "step": _step,
    "equals": _equals,
    "lgamma": gammaln,
    "loggam": gammaln,
    "round": np.round,
    "trunc": np.trunc,
    "min": np.minimum,
    "max": np.maximum,
}

REDUCING_FUNCTIONS = {
    "sum": np.sum,
    "mean": np.mean,
    "prod": np.prod,
    "sd": lambda x, axis=None: np.std(x, axis=axis, ddof=1),
}



def is_known_function(name: str) -> bool:
    return name in ELEMENTWISE_FUNCTIONS or name in REDUCING_FUNCTIONS or name == "inprod"


def register_function(name: str, function: Callable, reducing: bool = False, override: bool = False) -> None:
    """Make ``function`` callable from model code as ``name``.

    Elementwise functions are applied to their (broadcast) arguments as
    they are. Reducing functions take one array plus an ``axis`` keyword:
    ``axis=None`` collapses it to a scalar, ``axis=1`` gives one value per
    row of a batched evaluation. Register before building the definitions
    that use the function.
    """
    if not name.isidentifier():
        raise ModelDefinitionError(f"Invalid function name '{name}'")
    if is_known_function(name) and not override:
        raise ModelDefinitionError(f"Function '{name}' is already defined; pass override=True to replace it")
    ELEMENTWISE_FUNCTIONS.pop(name, None)
    REDUCING_FUNCTIONS.pop(name, None)
    (REDUCING_FUNCTIONS if reducing else ELEMENTWISE_FUNCTIONS)[name] = function

_BINARY = {
    "+": operator.add,
    "-": operator.sub,
    "*": operator.mul,
    "/": np.true_divide,
    "^": np.power,
    "==": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
    "&&": np.logical_and,
    "||": np.logical_or,
}

_UNARY = {"-": operator.neg, "!": np.logical_not}


# ---------------------------------------------------------------------------
# Resolved expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Const:
    value: Any


@dataclass(frozen=True)
class Ref:
    """Reference to elements of a model variable.

    ``selector`` indexes the variable's value array (0-based ints and
    slices); ``text`` is the canonical 1-based name, e.g. ``mu[1:3]``.
    """

    variable: str
    selector: Selector
    text: str


def _render_leaf(expr):
    if isinstance(expr, Const):
        if np.ndim(expr.value) == 0:
            return format_number(expr.value)
        return "c(" + ", ".join(format_number(v) for v in np.ravel(expr.value)) + ")"
    if isinstance(expr, Ref):
        return expr.text
    return None


def render(expr) -> str:
    """Human-readable text of a resolved expression."""
    return deparse_expression(expr, leaf=_render_leaf)


def refs_in(expr):
    """Yield every Ref leaf of a resolved expression."""
    if isinstance(expr, Ref):
        yield expr
    elif isinstance(expr, UnaryOp):
        yield from refs_in(expr.operand)
    elif isinstance(expr, BinaryOp):
        yield from refs_in(expr.left)
        yield from refs_in(expr.right)
    elif isinstance(expr, Call):
        for arg in expr.args:
            yield from refs_in(arg)


def element_name(name: str, items: Sequence) -> str:
    """Canonical 1-based element name from ints and (lo, hi) ranges."""
    if not items:
        return name
    parts = [f"{item[0]}:{item[1]}" if isinstance(item, tuple) else str(item) for item in items]
    return f"{name}[{', '.join(parts)}]"


def make_selector(
    name: str,
    items: Sequence,
    dims: Tuple[int, ...],
    error: Type[BugsError] = ModelDefinitionError,
) -> Selector:
    """Convert 1-based ints / inclusive (lo, hi) ranges into a 0-based selector.

    An empty ``items`` selects the whole variable.
    """
    if not items:
        return tuple(slice(0, extent) for extent in dims)
    if len(items) != len(dims):
        raise error(f"'{name}' has {len(dims)} dimension(s) but {len(items)} index(es) were given")
    selector = []
    for item, extent in zip(items, dims):
        if isinstance(item, tuple):
            lo, hi = item
            if lo < 1 or hi > extent or lo > hi:
                raise error(f"Index range {lo}:{hi} out of bounds for '{name}' (extent {extent})")
            selector.append(slice(lo - 1, hi))
        else:
            if item < 1 or item > extent:
                raise error(f"Index {item} out of bounds for '{name}' (extent {extent})")
            selector.append(item - 1)
    return tuple(selector)


# ---------------------------------------------------------------------------
# Evaluation of parser expressions against an environment
# ---------------------------------------------------------------------------


def evaluate_index(item, env: Mapping[str, Any]):
    """Evaluate one index item to an int or an inclusive (lo, hi) pair."""
    if isinstance(item, Range):
        return (_as_int(evaluate(item.start, env)), _as_int(evaluate(item.end, env)))
    return _as_int(evaluate(item, env))


def _as_int(value) -> int:
    if np.ndim(value) != 0:
        raise ModelDefinitionError(f"Index value {value!r} is not a scalar")
    value = float(value)
    if not value.is_integer():
        raise ModelDefinitionError(f"Index value {value} is not an integer")
    return int(value)


def evaluate(expr, env: Mapping[str, Any]):
    """Evaluate a parser expression; names are looked up in ``env`` (1-based arrays)."""
    if isinstance(expr, Number):
        return expr.value
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Variable):
        if expr.name not in env:
            raise UnresolvedSymbolError(expr.name)
        value = env[expr.name]
        if not expr.indices:
            return value
        array = np.asarray(value, dtype=float)
        items = [evaluate_index(item, env) for item in expr.indices]
        selector = make_selector(expr.name, items, array.shape)
        return array[selector]
    if isinstance(expr, UnaryOp):
        return _UNARY[expr.op](evaluate(expr.operand, env))
    if isinstance(expr, BinaryOp):
        return _BINARY[expr.op](evaluate(expr.left, env), evaluate(expr.right, env))
    if isinstance(expr, Call):
        args = [evaluate(arg, env) for arg in expr.args]
        return _call(expr.function, args, batched=False)
    raise TypeError(f"Cannot evaluate {expr!r}")


def _batched_reduce(function: Callable, value):
    value = np.asarray(value)
    return function(value.reshape(value.shape[0], -1), axis=1)


def _call(function: str, args, batched: bool):
    if function in ELEMENTWISE_FUNCTIONS:
        return ELEMENTWISE_FUNCTIONS[function](*args)
    if function in REDUCING_FUNCTIONS:
        reducer = REDUCING_FUNCTIONS[function]
        if batched:
            return _batched_reduce(reducer, args[0])
        return reducer(args[0])
    if function == "inprod":
        product = np.multiply(args[0], args[1])
        return _batched_reduce(np.sum, product) if batched else np.sum(product)
    raise ModelDefinitionError(f"Unknown function '{function}'")


# ---------------------------------------------------------------------------
# Compilation of resolved expressions
# ---------------------------------------------------------------------------


def compile_expression(
    expr, values: Mapping[str, np.ndarray], batched: bool = False
) -> Callable[[], Any]:
    """Compile a resolved expression into a zero-argument closure.

    The closure reads ``values`` arrays in place, so callers must mutate
    those arrays rather than rebinding them. With ``batched`` each array
    carries a leading sample axis and the result has one entry per sample.
    """
    if isinstance(expr, Const):
        value = expr.value
        return lambda: value
    if isinstance(expr, Ref):
        array = values[expr.variable]
        selector = ((slice(None),) + expr.selector) if batched else expr.selector
        return lambda: array[selector]
    if isinstance(expr, UnaryOp):
        operand = compile_expression(expr.operand, values, batched)
        op = _UNARY[expr.op]
        return lambda: op(operand())
    if isinstance(expr, BinaryOp):
        left = compile_expression(expr.left, values, batched)
        right = compile_expression(expr.right, values, batched)
        op = _BINARY[expr.op]
        return lambda: op(left(), right())
    if isinstance(expr, Call):
        args = [compile_expression(arg, values, batched) for arg in expr.args]
        function = expr.function
        if function in ELEMENTWISE_FUNCTIONS:
            fn = ELEMENTWISE_FUNCTIONS[function]
            if len(args) == 1:
                (only,) = args
                return lambda: fn(only())
            return lambda: fn(*(arg() for arg in args))
        return lambda: _call(function, [arg() for arg in args], batched)
    raise TypeError(f"Cannot compile {expr!r}")
