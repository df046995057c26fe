"""Energy-adaptive preconditioned gradient descent (C++ core)."""

import json as _json

from ._energia import (
    EnergiaError,
    aepg_step,
    doptimal_data,
    doptimal_eval,
    fixed_spd_apply,
    minimize,
    projection_matrix,
    simplex_apply,
    trace_header,
    verify,
    verify_suites,
)
from ._energia import run as _run

__all__ = [
    "EnergiaError",
    "aepg_step",
    "doptimal_data",
    "doptimal_eval",
    "fixed_spd_apply",
    "minimize",
    "projection_matrix",
    "run",
    "simplex_apply",
    "trace_header",
    "verify",
    "verify_suites",
]


def run(config=None, **overrides):
    """Run one experiment. `config` is a dict or JSON string; keyword overrides are merged in."""
    if isinstance(config, str):
        config = _json.loads(config)
    merged = {"version": 1}
    merged.update(config or {})
    merged.update(overrides)
    return _run(_json.dumps(merged))
