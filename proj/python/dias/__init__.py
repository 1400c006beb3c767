"""Phase-type job models, priority scheduling simulation and drop-ratio planning.

Scenario, targets and result documents are plain dicts with the same layout
as the JSON files the ``dias`` command line tool reads and writes.
"""

import json

from ._dias import (
    Error,
    PhaseType,
    SchemaError,
    convolve,
    effective_tasks,
    erlang,
    exponential,
    preset_names,
    wave_probabilities,
)
from . import _dias

__all__ = [
    "Error",
    "PhaseType",
    "SchemaError",
    "convolve",
    "effective_tasks",
    "erlang",
    "exponential",
    "plan",
    "predict",
    "preset",
    "preset_names",
    "simulate",
    "sweep",
    "validate",
    "wave_probabilities",
]


def _text(document):
    return document if isinstance(document, str) else json.dumps(document)


def preset(name):
    return json.loads(_dias.preset_json(name))


def validate(scenario):
    return json.loads(_dias.validate_json(_text(scenario)))


def predict(scenario):
    return json.loads(_dias.predict_json(_text(scenario)))


def simulate(scenario, runs=1):
    return json.loads(_dias.simulate_json(_text(scenario), runs))


def sweep(scenario, grid, runs=5):
    """grid maps a sweep key (e.g. "theta_map.low") to a list of values."""
    axes = [(key, json.dumps(list(values))) for key, values in grid.items()]
    return json.loads(_dias.sweep_json(_text(scenario), axes, runs))


def plan(scenario, targets):
    return json.loads(_dias.plan_json(_text(scenario), _text(targets)))
