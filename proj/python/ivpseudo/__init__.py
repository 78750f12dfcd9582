"""Python front end for the ivpseudo C++ library."""

import csv
import io
import json

from . import _ivpseudo as _core
from ._ivpseudo import (
    ConfigError,
    DataError,
    DegeneracyError,
    DimensionError,
    Error,
    IoError,
    LinearAlgebraError,
    ParseError,
    PreconditionError,
    fit_lasso,
    generate_pseudos,
    lambda_max,
    normal_critical,
    preset_names,
    tsls,
)

__version__ = _core.__version__

__all__ = [
    "ConfigError", "DataError", "DegeneracyError", "DimensionError", "Error", "IoError",
    "LinearAlgebraError", "ParseError", "PreconditionError",
    "fit_lasso", "generate_pseudos", "lambda_max", "normal_critical", "preset_names", "tsls",
    "preset", "simulate", "estimate", "monte_carlo",
]


def preset(name, p=0, **overrides):
    cfg = json.loads(_core.preset_json(name, p))
    cfg.update(overrides)
    return cfg


def simulate(scenario, seed=0):
    if isinstance(scenario, str):
        scenario = preset(scenario)
    return _core.simulate(json.dumps(scenario), seed)


def estimate(Z, D, Y, X=None, method="proposed", seed=0, **tuning):
    return json.loads(_core.estimate(Z, D, Y, X, method, seed, **tuning))


def _rows(text):
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        parsed = {}
        for k, v in row.items():
            try:
                parsed[k] = int(v)
            except ValueError:
                try:
                    parsed[k] = float(v)
                except ValueError:
                    parsed[k] = v if v != "" else None
        out.append(parsed)
    return out


def monte_carlo(scenario, replicates=1, methods=("proposed",), threads=1, seed=0, omega=2.01, screen_s=0):
    """Returns (metrics rows, replicate rows) as lists of dicts."""
    if isinstance(scenario, str):
        scenario = preset(scenario)
    metrics, records = _core.monte_carlo(json.dumps(scenario), replicates, list(methods), threads, seed, omega,
                                         screen_s)
    return _rows(metrics), _rows(records)
