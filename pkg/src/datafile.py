"""Constants, data and inits files.

Files are JSON objects mapping names to a number, a (nested) list or a
``{"dim": [...], "values": [...]}`` object holding row-major values.
``null`` marks a missing element and becomes NaN.
"""

import json
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from .errors import ConfigError


def _to_float(value, source: str, name: str):
    try:
        return np.asarray(value, dtype=float) if value is not None else np.nan
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"'{name}' is not numeric ({exc})", source) from exc


def _convert(name: str, entry: Any, source: str):
    if isinstance(entry, dict):
        if set(entry) != {"dim", "values"}:
            raise ConfigError(f"'{name}' must have exactly the keys 'dim' and 'values'", source)
        dims = tuple(int(d) for d in entry["dim"])
        values = [np.nan if v is None else v for v in entry["values"]]
        array = _to_float(values, source, name)
        if array.size != int(np.prod(dims)):
            raise ConfigError(f"'{name}' has {array.size} values for dimensions {list(dims)}", source)
        return array.reshape(dims)
    if isinstance(entry, list):
        return _to_float(_nulls_to_nan(entry), source, name)
    if entry is None:
        return np.nan
    if isinstance(entry, bool) or not isinstance(entry, (int, float)):
        raise ConfigError(f"'{name}' is not numeric", source)
    return float(entry)


def _nulls_to_nan(entry):
    if isinstance(entry, list):
        return [_nulls_to_nan(item) for item in entry]
    return np.nan if entry is None else entry


def parse_values(document: Dict[str, Any], source: str = "<values>") -> Dict[str, Any]:
    if not isinstance(document, dict):
        raise ConfigError("expected a JSON object of name -> values", source)
    return {name: _convert(name, entry, source) for name, entry in document.items()}


def load_values(path: Optional[Union[str, Path]]) -> Dict[str, Any]:
    """Read a values file; a missing path means no values."""
    if path is None:
        return {}
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read file ({exc.strerror})", str(path)) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}: {exc.msg}", str(path)) from exc
    return parse_values(document, str(path))


def dump_values(values: Dict[str, Any]) -> Dict[str, Any]:
    """JSON-ready form of a values mapping (NaN written as null)."""

    def plain(value):
        array = np.asarray(value, dtype=float)
        if array.ndim == 0:
            return None if np.isnan(array) else float(array)
        return {"dim": list(array.shape), "values": [None if np.isnan(v) else float(v) for v in array.ravel()]}

    return {name: plain(value) for name, value in values.items()}
