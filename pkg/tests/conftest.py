"""Shared fixtures: the pump failure model and small helpers."""

from pathlib import Path

import pytest

from src.commands import load_definition
from src.datafile import load_values
from src.model import Model

PUMP_DIR = Path(__file__).resolve().parent.parent / "models" / "pump"
PUMP_T = (94.3, 15.7, 62.9, 126.0, 5.24, 31.4, 1.05, 1.05, 2.1, 10.5)
PUMP_X = (5, 1, 5, 14, 3, 19, 1, 1, 4, 22)


@pytest.fixture
def pump_files():
    """Paths of the pump model, constants, data and inits files."""
    return {
        "model": str(PUMP_DIR / "pump.bugs"),
        "constants": str(PUMP_DIR / "constants.json"),
        "data": str(PUMP_DIR / "data.json"),
        "inits": str(PUMP_DIR / "inits.json"),
    }


@pytest.fixture
def pump_definition(pump_files):
    return load_definition(pump_files["model"], pump_files["constants"])


@pytest.fixture
def pump_model(pump_definition, pump_files):
    """Pump model with data attached, alpha = beta = 1 and a fixed seed."""
    return Model(
        pump_definition,
        data=load_values(pump_files["data"]),
        inits=load_values(pump_files["inits"]),
        seed=2024,
    )
