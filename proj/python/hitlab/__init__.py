"""Hitting-time, dimension and recurrence experiments on exact dynamical systems."""

import json

from . import _core
from ._core import (
    HitlabError,
    SCHEMA_VERSION,
    catalog,
    estimate_dimension,
    hitting_time,
    jacobian_rank,
    orbit,
    return_curve,
    sample_invariant,
    selftest,
    set_workers,
)

__all__ = [
    "HitlabError",
    "SCHEMA_VERSION",
    "catalog",
    "estimate_dimension",
    "hitting_time",
    "jacobian_rank",
    "orbit",
    "report",
    "return_curve",
    "run",
    "sample_invariant",
    "selftest",
    "set_workers",
]


def run(config, workers=0, seed=None):
    """Run an INI config (text) and return the result document as a dict."""
    return json.loads(_core.run_config(config, workers, seed))


def report(results):
    """Report text for result dicts as returned by run()."""
    return _core.report([json.dumps(r) for r in results])
