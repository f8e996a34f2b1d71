"""
Data generators for the simulation scenarios.

Every generator takes either an integer seed or a `numpy.random.Generator`
already positioned on its stream, and is deterministic given it.
"""

from collections import namedtuple

import numpy as np

from pyqebd.core.errors import DimensionError
from pyqebd.core.exact import (
    GIBBS_BURN_IN,
    GIBBS_THIN,
    exact_sampler,
    gibbs_sample_clusters,
    gibbs_sampler,
    make_rng,
)
from pyqebd.core.model import BinaryPanel, expit
from pyqebd.models.markov import markov_covariates

MARKOV_TIMES = (7, 8, 9, 10)
QELR_BURN_IN = 2000
QELR_THIN = 20
QELR_LEVELS = 3

MarkovData = namedtuple("MarkovData", ["panel", "X", "smoking"])
QelrData = namedtuple("QelrData", ["panel", "X", "W", "U"])


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else make_rng(seed)


def gen_markov(truth, n, seed, times=MARKOV_TIMES, smoking_prob=0.5):
    """Simulate the first-order transition model with covariates (1, S, t).

    The first response follows logit β₀ + β₁S + β₂t₁; each later one adds
    γ·y_{t-1}. S is drawn Bernoulli(``smoking_prob``) per cluster.

    ## Parameters

    * **truth** (sequence of 4 floats): (β₀, β₁, β₂, γ).
    * **n** (int): Number of clusters.
    * **seed** (int or numpy.random.Generator): Seed.
    * **times** (sequence of int, optional): Observation times, default 7..10.

    ## Returns
    `MarkovData` with the panel, the (n, m, 3) covariates and S.

    ## Examples

    ```python
    data = gen_markov((0.423, 0.223, -0.316, 2.180), n=300, seed=1)
    data.panel.m
    # 4
    ```
    """
    b0, b1, b2, gamma = (float(v) for v in truth)
    rng = _rng(seed)
    smoking = (rng.random(n) < smoking_prob).astype(np.int8)
    y = np.zeros((n, len(times)), dtype=np.int8)
    previous = np.zeros(n)
    for t_idx, t in enumerate(times):
        eta = b0 + b1 * smoking + b2 * t + gamma * previous
        y[:, t_idx] = rng.random(n) < expit(eta)
        previous = y[:, t_idx]
    panel = BinaryPanel(y, node_names=["t{}".format(t) for t in times])
    return MarkovData(panel=panel, X=markov_covariates(smoking, times), smoking=smoking)


def gen_qebd(truth, n, seed, method="exact", burn_in=GIBBS_BURN_IN, thin=GIBBS_THIN):
    """Draw a QEBD panel with the exact or the Gibbs sampler."""
    if method == "exact":
        return exact_sampler(truth, n, _rng(seed))
    if method == "gibbs":
        return gibbs_sampler(truth, n, burn_in=burn_in, thin=thin, seed=_rng(seed))
    raise ValueError("method must be 'exact' or 'gibbs', got {!r}".format(method))


def equality_kernels(U):
    """w^ℓ_ij = 1{u^ℓ_i = u^ℓ_j} off the diagonal, for characteristics U of shape (L, m)."""
    U = np.asarray(U)
    W = (U[:, :, None] == U[:, None, :]).astype(float)
    W[:, np.arange(U.shape[1]), np.arange(U.shape[1])] = 0.0
    return W


def qelr_covariates(n, m, rng):
    """(1, x1, x2) per (cluster, node) with x1, x2 independent standard normal."""
    X = np.ones((n, m, 3))
    X[:, :, 1:] = rng.standard_normal((n, m, 2))
    return X


def gen_qelr(
    truth,
    n,
    m,
    L,
    seed,
    family="ci",
    burn_in=QELR_BURN_IN,
    thin=QELR_THIN,
    levels=QELR_LEVELS,
):
    """Simulate a QELR panel by per-cluster Gibbs sampling.

    Covariates (1, x1, x2) are drawn standard normal per (cluster, node). For
    the linear family each characteristic u^ℓ_j is uniform on {1..levels} and
    the kernels are equality indicators, so Pr(w^ℓ_ij = 1) = 1/levels. The
    common-interaction family is the linear family with one all-ones kernel.

    ## Parameters

    * **truth** (tuple): ``(beta, gamma)`` with ``beta`` of length 3 and
      ``gamma`` of length 1 (``ci``) or L (``linear``).
    * **n**, **m** (int): Clusters and responses per cluster.
    * **L** (int): Number of kernels for the linear family.
    * **seed** (int or numpy.random.Generator): Seed.
    * **family** (str, optional): ``ci`` or ``linear``.

    ## Returns
    `QelrData` with the panel, covariates X, kernels W (L, m, m) and the
    characteristics U (None for ``ci``).
    """
    beta, gamma = (np.atleast_1d(np.asarray(v, dtype=float)) for v in truth)
    rng = _rng(seed)
    family = family.lower().replace("qelr-", "")
    X = qelr_covariates(n, m, rng)
    if beta.size != X.shape[2]:
        raise DimensionError("beta must have {} entries".format(X.shape[2]))
    if family == "ci":
        if gamma.size != 1:
            raise DimensionError("the common-interaction family has one gamma")
        U = None
        W = (np.ones((m, m)) - np.eye(m))[None]
    elif family == "linear":
        if L < 1 or gamma.size != L:
            raise DimensionError("need L >= 1 kernels with one gamma each")
        U = rng.integers(1, levels + 1, size=(L, m))
        W = equality_kernels(U)
    else:
        raise ValueError("family must be 'ci' or 'linear', got {!r}".format(family))
    Theta = np.tensordot(gamma, W, axes=([0], [0]))
    bias = X @ beta
    panel = gibbs_sample_clusters(bias, Theta, burn_in, thin, rng)
    return QelrData(panel=panel, X=X, W=W, U=U)
