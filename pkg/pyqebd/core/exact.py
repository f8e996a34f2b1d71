"""
Computations over the full 2^m configuration space of a QEBD: the
normalizing constant, the pmf and its moments, exact and Gibbs samplers,
exact maximum likelihood, and exact expectations of the pseudo-likelihood
estimating functions.
"""

import json
import logging
import warnings
from collections import namedtuple
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import special, stats

from pyqebd.core.errors import (
    DimensionError,
    DomainError,
    EnumerationLimitError,
    RankDeficiencyError,
)
from pyqebd.core.gee import estimating_function_value
from pyqebd.core.model import (
    BinaryPanel,
    QebdParams,
    expit,
    logit,
    n_pairs,
    pair_indices,
)
from pyqebd.models.qebd import QebdSpec

logger = logging.getLogger(__name__)

ENUMERATION_CAP = 20
DIVERGENCE_THRESHOLD = 30.0
GIBBS_BURN_IN = 1000
GIBBS_THIN = 10
RNG_ALGORITHM = "numpy.random.Philox"

# configs per block when accumulating moments of the sufficient statistics
_CHUNK = 1 << 14

Moments = namedtuple("Moments", ["mean", "cov", "second"])


def make_rng(seed, stream=None):
    """Counter-based generator for ``seed``; ``stream`` selects an independent substream.

    Substreams are addressed by key, so replicate r draws the same numbers
    whether or not replicates before it were ever generated.
    """
    if stream is None:
        seq = np.random.SeedSequence(int(seed))
    else:
        key = tuple(int(s) for s in np.atleast_1d(stream))
        seq = np.random.SeedSequence(int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(seq))


def check_enumeration_cap(m, cap=ENUMERATION_CAP):
    if m > cap:
        raise EnumerationLimitError(m, cap)


def enumerate_configs(m):
    """All 2^m binary vectors in binary-counter order, y_1 least significant."""
    codes = np.arange(1 << m)[:, None]
    return ((codes >> np.arange(m)) & 1).astype(np.int8)


def config_index(y):
    """Position of each binary vector (row) of ``y`` in ``enumerate_configs`` order."""
    y = np.atleast_2d(np.asarray(y, dtype=np.int64))
    return y @ (1 << np.arange(y.shape[1]))


def sufficient_statistics(configs):
    """s(y) = (y, {y_i y_j}_{i<j}) for every row of ``configs``."""
    configs = np.atleast_2d(np.asarray(configs, dtype=float))
    rows, cols = pair_indices(configs.shape[1])
    return np.hstack([configs, configs[:, rows] * configs[:, cols]])


def _log_weights(y, params):
    y = np.asarray(y, dtype=float)
    Theta = params.Theta
    return y @ params.beta + 0.5 * np.einsum("ci,ij,cj->c", y, Theta, y)


@dataclass(frozen=True)
class ConfigTable:
    """Every configuration of B^m with its unnormalized log-weight.

    ## Parameters

    * **m** (int): Number of responses.
    * **configs** (numpy.ndarray): 2^m × m array, binary-counter order.
    * **log_weights** (numpy.ndarray): yᵀβ + ½ yᵀΘy per configuration.
    """

    m: int
    configs: np.ndarray
    log_weights: np.ndarray

    @classmethod
    def build(cls, params, cap=ENUMERATION_CAP):
        check_enumeration_cap(params.m, cap)
        configs = enumerate_configs(params.m)
        log_weights = _log_weights(configs, params)
        configs.setflags(write=False)
        log_weights.setflags(write=False)
        return cls(m=params.m, configs=configs, log_weights=log_weights)

    @property
    def log_normalizer(self):
        return float(special.logsumexp(self.log_weights))

    @property
    def probabilities(self):
        return np.exp(self.log_weights - self.log_normalizer)

    def __len__(self):
        return self.configs.shape[0]


def log_normalizer(params, cap=ENUMERATION_CAP):
    """Λ = log Σ_y exp{yᵀβ + ½ yᵀΘy}, evaluated with a max-shifted log-sum-exp.

    ## Raises
    `EnumerationLimitError`: If ``params.m`` exceeds ``cap``.

    ## Examples

    ```python
    log_normalizer(QebdParams.zeros(5))
    # 3.4657359027997265
    ```
    """
    return ConfigTable.build(params, cap).log_normalizer


def _check_binary_vector(y, m):
    y = np.asarray(y)
    if y.shape[-1] != m:
        raise DimensionError("expected {} responses, got {}".format(m, y.shape[-1]))
    if not np.all((y == 0) | (y == 1)):
        raise DomainError("configurations must have entries exactly 0 or 1")
    return y


def pmf(y, params, cap=ENUMERATION_CAP):
    """Probability of configuration ``y`` (or of each row of a 2-D ``y``)."""
    y = _check_binary_vector(y, params.m)
    lam = log_normalizer(params, cap)
    out = np.exp(_log_weights(np.atleast_2d(y), params) - lam)
    return float(out[0]) if y.ndim == 1 else out


def log_likelihood(params, panel, cap=ENUMERATION_CAP):
    """Exact QEBD log-likelihood of a panel."""
    lam = log_normalizer(params, cap)
    return float(_log_weights(panel.y, params).sum() - panel.n * lam)


def conditional_probability(params, j, y):
    """Pr(Y_j = 1 | y_[j]) computed from the ratio of joint probabilities."""
    y = np.array(_check_binary_vector(y, params.m), dtype=float)
    if y.ndim != 1:
        raise DimensionError("conditional_probability expects a single configuration")
    if not 0 <= j < params.m:
        raise DimensionError("node index {} out of range for m={}".format(j, params.m))
    pair = np.tile(y, (2, 1))
    pair[0, j] = 0.0
    pair[1, j] = 1.0
    lw = _log_weights(pair, params)
    return float(expit(lw[1] - lw[0]))


def exact_moments(params, cap=ENUMERATION_CAP):
    """Mean vector, covariance matrix and second moments E[Y_i Y_j] of Y.

    ``second`` is the m×m matrix of E[Y_i Y_j] with E[Y_j] on its diagonal.
    """
    table = ConfigTable.build(params, cap)
    prob = table.probabilities
    configs = table.configs.astype(float)
    mean = prob @ configs
    second = configs.T @ (configs * prob[:, None])
    cov = second - np.outer(mean, mean)
    return Moments(mean=mean, cov=(cov + cov.T) / 2.0, second=second)


def _statistic_moments(params, cap=ENUMERATION_CAP):
    """E[s(Y)] and Cov[s(Y)], accumulated blockwise over the config table."""
    table = ConfigTable.build(params, cap)
    prob = table.probabilities
    d = params.m + n_pairs(params.m)
    first = np.zeros(d)
    second = np.zeros((d, d))
    for start in range(0, len(table), _CHUNK):
        stats = sufficient_statistics(table.configs[start : start + _CHUNK])
        w = prob[start : start + _CHUNK]
        first += w @ stats
        second += stats.T @ (stats * w[:, None])
    cov = second - np.outer(first, first)
    return first, (cov + cov.T) / 2.0, table.log_normalizer


def exact_sampler(params, n, seed, cap=ENUMERATION_CAP):
    """Draw n i.i.d. configurations by inverse-CDF over the config table.

    ## Parameters

    * **params** (QebdParams): Distribution parameters.
    * **n** (int): Number of clusters to draw.
    * **seed** (int or numpy.random.Generator): Seed, or a generator
      already positioned on its stream.

    ## Returns
    `BinaryPanel` with n rows.
    """
    if n < 1:
        raise ValueError("n must be a positive integer, got {!r}".format(n))
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    table = ConfigTable.build(params, cap)
    cdf = np.cumsum(table.probabilities)
    cdf[-1] = 1.0
    idx = np.searchsorted(cdf, rng.random(n), side="right")
    idx = np.minimum(idx, len(table) - 1)
    return BinaryPanel(table.configs[idx])


def _sweep(state, bias, Theta, rng):
    """One systematic-scan sweep over sites 1..m for every chain in ``state``.

    ``bias`` is (chains, m); ``Theta`` is (m, m) shared or (chains, m, m).
    """
    m = state.shape[1]
    for j in range(m):
        if Theta.ndim == 2:
            eta = bias[:, j] + state @ Theta[:, j]
        else:
            eta = bias[:, j] + np.einsum("ci,ci->c", state, Theta[:, :, j])
        state[:, j] = rng.random(state.shape[0]) < expit(eta)


def _validate_chain_args(burn_in, thin):
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0, got {!r}".format(burn_in))
    if thin < 1:
        raise ValueError("thin must be >= 1, got {!r}".format(thin))


def gibbs_sampler(
    params, n, burn_in=GIBBS_BURN_IN, thin=GIBBS_THIN, seed=0, chains=None
):
    """Draw n configurations from a QEBD with a systematic-scan Gibbs sampler.

    Parallel chains (``min(n, 100)`` by default) are advanced together. Each
    chain runs ``burn_in`` sweeps, then emits one vector every ``thin``
    sweeps; emissions are interleaved across chains. Nothing is enumerated,
    so there is no cap on m.

    ## Parameters

    * **params** (QebdParams): Distribution parameters.
    * **n** (int): Number of vectors to emit.
    * **burn_in** (int, optional): Sweeps discarded per chain, default 1000.
    * **thin** (int, optional): Sweeps between emissions, default 10.
    * **seed** (int or numpy.random.Generator, optional): Seed.
    * **chains** (int, optional): Number of parallel chains.

    ## Returns
    `BinaryPanel` with n rows.
    """
    if n < 1:
        raise ValueError("n must be a positive integer, got {!r}".format(n))
    _validate_chain_args(burn_in, thin)
    chains = min(n, 100) if chains is None else int(chains)
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)

    Theta = params.Theta
    bias = np.broadcast_to(params.beta, (chains, params.m))
    state = rng.integers(0, 2, size=(chains, params.m)).astype(float)
    for _ in range(burn_in):
        _sweep(state, bias, Theta, rng)

    rounds = -(-n // chains)
    out = np.empty((rounds, chains, params.m), dtype=np.int8)
    for r in range(rounds):
        for _ in range(thin):
            _sweep(state, bias, Theta, rng)
        out[r] = state
    return BinaryPanel(out.reshape(-1, params.m)[:n])


def gibbs_sample_clusters(bias, Theta, burn_in, thin, rng):
    """One Gibbs draw per cluster when every cluster has its own bias.

    ``bias`` is the n×m matrix of cluster-specific main effects and
    ``Theta`` an m×m (or n×m×m) symmetric interaction matrix. Each cluster
    is its own chain, run for ``burn_in + thin`` sweeps.

    ## Raises
    `DimensionError`: If the shapes of ``bias`` and ``Theta`` disagree.
    """
    _validate_chain_args(burn_in, thin)
    bias = np.asarray(bias, dtype=float)
    Theta = np.asarray(Theta, dtype=float)
    n, m = bias.shape
    if Theta.shape not in ((m, m), (n, m, m)):
        raise DimensionError(
            "Theta has shape {}, expected ({m}, {m}) or ({n}, {m}, {m})".format(
                Theta.shape, n=n, m=m
            )
        )
    state = rng.integers(0, 2, size=(n, m)).astype(float)
    for _ in range(burn_in + thin):
        _sweep(state, bias, Theta, rng)
    return BinaryPanel(state.astype(np.int8))


@dataclass(frozen=True)
class MleFit:
    """Result of exact maximum likelihood for a QEBD.

    ``covariance`` is the inverse observed information, in the
    (β, θ) order of ``estimates.vector``.
    """

    estimates: QebdParams
    covariance: np.ndarray
    loglik: float
    iterations: int
    converged: bool
    diverged: bool = False
    score: np.ndarray = None
    names: tuple = ()

    method = "mle"

    @property
    def standard_errors(self):
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def wald(self):
        se = self.standard_errors
        with np.errstate(divide="ignore", invalid="ignore"):
            z = self.estimates.vector / se
        return z, 2.0 * stats.norm.sf(np.abs(z))

    def summary(self):
        z, p_value = self.wald()
        return pd.DataFrame(
            {
                "estimate": self.estimates.vector,
                "se": self.standard_errors,
                "z": z,
                "p_value": p_value,
            },
            index=pd.Index(self.names, name="parameter"),
        )

    def to_dict(self):
        return {
            "method": self.method,
            "names": list(self.names),
            "estimates": [float(v) for v in self.estimates.vector],
            "covariance": np.asarray(self.covariance).tolist(),
            "loglik": float(self.loglik),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "diverged": bool(self.diverged),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _default_init(panel):
    n = panel.n
    means = np.clip(panel.y.mean(axis=0), 1.0 / (2 * n), 1.0 - 1.0 / (2 * n))
    return QebdParams(beta=logit(means), theta=np.zeros(n_pairs(panel.m)))


def mle_fit(panel, init=None, max_iter=100, tol=1e-8, cap=ENUMERATION_CAP):
    """Exact QEBD maximum likelihood by Newton-Raphson on the sufficient statistics.

    The score is S_obs - n·E[s(Y)] and the Hessian -n·Cov[s(Y)]. A step that
    lowers the log-likelihood is halved, at most 30 times; if none of the
    halved steps helps, the previous iterate is kept and the fit stops
    unconverged.

    ## Parameters

    * **panel** (BinaryPanel): Observed clusters.
    * **init** (QebdParams, optional): Starting point; defaults to logits of
      the clamped marginal means with θ = 0.
    * **max_iter** (int, optional): Newton iterations, default 100.
    * **tol** (float, optional): Convergence threshold on ‖score‖∞.

    ## Returns
    `MleFit`. Non-convergence and divergence are flagged, not raised.

    ## Raises
    * `EnumerationLimitError`: If m exceeds the cap.
    * `RankDeficiencyError`: If the information matrix is singular.
    """
    m, n = panel.m, panel.n
    check_enumeration_cap(m, cap)
    s_obs = sufficient_statistics(panel.y).sum(axis=0)
    psi = (init if init is not None else _default_init(panel)).vector

    def evaluate(values):
        params = QebdParams.from_vector(values, m)
        first, cov, lam = _statistic_moments(params, cap)
        return values @ s_obs - n * lam, s_obs - n * first, n * cov

    loglik, score, info = evaluate(psi)
    converged = diverged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        if np.max(np.abs(score)) < tol:
            converged = True
            iterations -= 1
            break
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            raise RankDeficiencyError(
                "Observed information is singular at iteration {}".format(iterations)
            ) from None

        t = 1.0
        for _ in range(30):
            trial = psi + t * step
            new_loglik, new_score, new_info = evaluate(trial)
            if new_loglik >= loglik:
                break
            t /= 2.0
        else:
            logger.debug("mle step halving failed at iteration %d", iterations)
            break
        psi = trial
        if np.max(np.abs(psi)) > DIVERGENCE_THRESHOLD:
            diverged = True
            logger.debug("mle diverged at iteration %d", iterations)
            break
        loglik, score, info = new_loglik, new_score, new_info
        logger.debug(
            "mle iteration %d loglik=%.10g max|score|=%.3g",
            iterations,
            loglik,
            np.max(np.abs(score)),
        )
    else:
        converged = np.max(np.abs(score)) < tol

    if not converged and not diverged:
        warnings.warn(
            "Newton iterations did not converge in {} steps "
            "(max|score|={:.3g})".format(iterations, np.max(np.abs(score))),
            stacklevel=2,
        )

    estimates = QebdParams.from_vector(psi, m)
    if diverged:
        covariance = np.full((psi.size, psi.size), np.nan)
        loglik = log_likelihood(estimates, panel, cap)
    else:
        try:
            covariance = np.linalg.inv(info)
        except np.linalg.LinAlgError:
            raise RankDeficiencyError("Observed information is singular") from None
        covariance = (covariance + covariance.T) / 2.0
    return MleFit(
        estimates=estimates,
        covariance=covariance,
        loglik=float(loglik),
        iterations=iterations,
        converged=bool(converged) and not diverged,
        diverged=diverged,
        score=score,
        names=tuple(estimates.names(list(panel.node_names))),
    )


def expected_estimating_function(params, corr, rho=None, cap=ENUMERATION_CAP):
    """Exact per-cluster expectation of the QEBD pseudo-likelihood estimating function.

    Evaluates E[φ(ψ₀; R_ρ)] for one cluster by summing the estimating
    function over every configuration, weighted by its probability under
    ``params``. Under a diagonal working correlation the result is zero.

    ## Parameters

    * **params** (QebdParams): True parameters ψ₀.
    * **corr** (WorkingCorrelation or str): Working correlation kind.
    * **rho** (float, optional): Correlation parameter; overrides ``corr.rho``.

    ## Returns
    numpy.ndarray of length m + m(m-1)/2.
    """

    table = ConfigTable.build(params, cap)
    spec = QebdSpec(params.m)
    psi = spec.psi_from_params(params)
    contributions = estimating_function_value(
        psi, corr, rho, BinaryPanel(table.configs), spec, per_cluster=True
    )
    return table.probabilities @ contributions


def c_matrix(params, j, cap=ENUMERATION_CAP):
    """C_j = E{Y⁰_[j] (Y - μ)ᵀ ν_j} by enumeration.

    μ holds the full conditional means of every node and ν_j = μ_j(1 - μ_j).
    Row j vanishes because Y⁰_[j] has a zero in position j, and column j
    vanishes because E(Y_j - μ_j | Y_[j]) = 0.
    """
    if not 0 <= j < params.m:
        raise DimensionError("node index {} out of range for m={}".format(j, params.m))
    table = ConfigTable.build(params, cap)
    prob = table.probabilities
    y = table.configs.astype(float)
    mu = expit(params.beta + y @ params.Theta)
    nu_j = mu[:, j] * (1.0 - mu[:, j])
    y0 = y.copy()
    y0[:, j] = 0.0
    return np.einsum("c,ca,cb->ab", prob * nu_j, y0, y - mu)
