"""Python front end for the rdos harness.

Configs are passed as JSON text or as dicts; results come back as plain
Python structures.
"""

import json

from . import _rdos
from ._rdos import (
    ConfigError,
    InsertionWeights,
    api_cost,
    bootstrap_ci,
    e2e,
    insertion_score,
    payload_score,
    rollout_count,
    s_stab,
    select_intervals,
)

__all__ = [
    "ConfigError",
    "InsertionWeights",
    "api_cost",
    "bootstrap_ci",
    "config_hash",
    "convergence_csv",
    "e2e",
    "effective_config",
    "insertion_score",
    "payload_score",
    "report",
    "rollout_count",
    "run_experiment",
    "run_sweep",
    "s_stab",
    "select_intervals",
]


def _text(config):
    return config if isinstance(config, str) else json.dumps(config)


def effective_config(config):
    return json.loads(_rdos.effective_config(_text(config)))


def config_hash(config):
    return _rdos.config_hash(_text(config))


def run_experiment(config, pipeline="full", workers=1, out_dir=None):
    """Run the pipeline; returns {"config_hash", "report", "records", "sweep"}."""
    return json.loads(_rdos.run_experiment(_text(config), pipeline, workers, out_dir))


def run_sweep(config, workers=1, out_dir=None):
    return json.loads(_rdos.run_sweep(_text(config), workers, out_dir))


def report(records_path):
    return _rdos.report(str(records_path))


def convergence_csv(*records_paths):
    return _rdos.convergence_csv([str(p) for p in records_paths])
