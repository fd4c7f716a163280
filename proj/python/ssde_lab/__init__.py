"""Python bindings for the ssde state space SDE library."""

import json

from . import _core
from ._core import SsdeError, __version__, kl_rate_h, ks_test_normal, presets, rng_algorithm, simulate

__all__ = [
    "SsdeError",
    "__version__",
    "fit_mle",
    "kl_rate_h",
    "ks_test_normal",
    "presets",
    "rng_algorithm",
    "run_experiment",
    "simulate",
    "suff_stats",
]


def suff_stats(preset, theta, T, m, seed):
    """Simulate one path and return its sufficient statistics as a dict."""
    return json.loads(_core.suff_stats(preset, list(theta), T, m, seed))


def fit_mle(preset, theta0, T, m, seed):
    """Simulate one path under theta0 and fit the approximated objective."""
    return json.loads(_core.fit_mle(preset, list(theta0), T, m, seed))


def run_experiment(kind, config, threads=1):
    """Run a harness experiment; `config` is a dict with the config-file keys."""
    return json.loads(_core.run_experiment(kind, json.dumps(config), threads))
