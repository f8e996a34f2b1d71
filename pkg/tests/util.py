"""Brute-force oracles shared by the unit and integration tests."""

import itertools
from importlib import resources

import numpy as np

from pyqebd.core.exact import make_rng
from pyqebd.core.model import QebdParams, n_pairs
from pyqebd.sim.replication import ScenarioConfig


def random_params(m, seed, scale=1.0):
    rng = make_rng(seed)
    return QebdParams(
        beta=rng.normal(0.0, scale, m), theta=rng.normal(0.0, scale / 2.0, n_pairs(m))
    )


def naive_weights(params):
    """exp{yᵀβ + Σ_{i<j} θ_ij y_i y_j} over all configs, via itertools."""
    Theta = params.Theta
    configs = [np.array(c, dtype=float)[::-1] for c in itertools.product((0, 1), repeat=params.m)]
    weights = []
    for y in configs:
        quad = sum(
            Theta[i, j] * y[i] * y[j] for i in range(params.m) for j in range(i + 1, params.m)
        )
        weights.append(np.exp(y @ params.beta + quad))
    return np.array(configs), np.array(weights)


def naive_pmf(y, params):
    configs, weights = naive_weights(params)
    match = np.all(configs == np.asarray(y, dtype=float), axis=1)
    return float(weights[match][0] / weights.sum())


def qebd5_params():
    return QebdParams(
        beta=[-1.5, -0.75, 0.0, 0.75, 1.5],
        theta=[-0.4, 1.2, 0.0, 0.0, -0.4, 0.0, 0.0, 0.0, 0.0, -0.4],
    )


def load_scenario(name, **changes):
    """A bundled scenario config, optionally with some fields replaced."""
    path = resources.files("pyqebd") / "data" / "scenarios" / (name + ".json")
    config = ScenarioConfig.from_file(str(path))
    return config.replace(**changes) if changes else config
