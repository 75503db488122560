"""Masked self-supervised ridge estimator: closed form, deterministic equivalents, experiments."""

import json as _json

from ._ssrlab import (  # noqa: F401
    Covariance,
    NumericError,
    ParameterError,
    __version__,
    ar1_pca_population_loss,
    ar1_phase_boundary,
    ar1_population_ssr_loss,
    bbp_prediction,
    covariance,
    fit_ssr,
    fit_ssr_coordinatewise,
    population_risk,
    predict_risk,
    predicted_density,
    sample,
    solve_kappa,
    spectrum,
    universal_support,
)
from ._ssrlab import run_json as _run_json


def run(config, subcommand="simulate"):
    """Run a Monte Carlo comparison; config is a dict in the CLI config format."""
    return _json.loads(_run_json(_json.dumps(config), subcommand))
