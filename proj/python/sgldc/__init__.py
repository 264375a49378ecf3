"""Reflection-coupling diagnostics for stochastic gradient Langevin dynamics."""

import json as _json

from ._core import (
    AssumptionParams,
    ConfigError,
    DistanceFunction,
    Model,
    fit_rate,
    far_field_witness,
    gaussian_w1_oracle,
    make_model,
    moment_step_bound,
    philox4x32,
    rate_report,
    run,
    solve_assignment,
    w1_1d,
    w1_exact,
)

__all__ = [
    "AssumptionParams",
    "ConfigError",
    "DistanceFunction",
    "Model",
    "fit_rate",
    "far_field_witness",
    "gaussian_w1_oracle",
    "make_model",
    "moment_step_bound",
    "philox4x32",
    "rate_report",
    "run",
    "run_config",
    "solve_assignment",
    "w1_1d",
    "w1_exact",
]

__version__ = "0.1.0"


def run_config(command, config, output_dir=""):
    """Like `run`, but takes the config as a dict."""
    return run(command, _json.dumps(config), output_dir)
