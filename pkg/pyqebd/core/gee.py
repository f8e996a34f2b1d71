"""
Pseudo-likelihood fitting on stacked designs.

``fit_gglm`` treats the pooled rows as one logistic GLM. ``fit_gee`` solves
the cluster-aware estimating equations

    φ(ψ; R_ρ) = Σ_k W̃_k A_k V_k⁻¹ (Y_k - μ_k),  V_k = A_k^½ R_ρ A_k^½

by Fisher scoring, alternating with moment estimates of ρ. Both work with
the scaled rows Z̃ = A^½ Z and Pearson residuals r̃ = A^-½ (Y - μ), so that
φ = Σ_k Z̃_kᵀ R⁻¹ r̃_k and the bread is B = Σ_k Z̃_kᵀ R⁻¹ Z̃_k.
"""

import json
import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from scipy import stats

from pyqebd.core.errors import (
    DimensionError,
    QicUnavailableError,
    RankDeficiencyError,
    SingularCovarianceError,
)
from pyqebd.core.model import (
    AR1,
    EXCHANGEABLE,
    INDEPENDENCE,
    PsiVector,
    WorkingCorrelation,
    correlation_bounds,
    expit,
    materialize_correlation,
)

logger = logging.getLogger(__name__)

DIVERGENCE_THRESHOLD = 30.0
GROWTH_LIMIT = 5
MU_FLOOR = 1e-10
QIC_CLAMP = 1e-12
RHO_SHRINK = 0.99
RIDGE = 1e-8
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class QuasiLik:
    """Pieces of the quasi-likelihood information criterion.

    ``value`` is the binary log quasi-likelihood Q(ψ̂), ``omega_hat`` the
    bread under independence and ``j_hat`` the robust covariance.
    """

    value: float
    omega_hat: np.ndarray
    j_hat: np.ndarray

    @property
    def penalty(self):
        return float(np.trace(self.omega_hat @ self.j_hat))

    @property
    def qic(self):
        return -2.0 * self.value + 2.0 * self.penalty

    @property
    def qicu(self):
        return -2.0 * self.value + 2.0 * self.omega_hat.shape[0]


@dataclass(frozen=True)
class GeeFit:
    """Result of a GGLM, GEE or node-wise pseudo-likelihood fit.

    ## Parameters

    * **estimates** (PsiVector): ψ̂.
    * **naive_cov** (numpy.ndarray): Model-based covariance B̂⁻¹.
    * **robust_cov** (numpy.ndarray or None): Sandwich B̂⁻¹M̂B̂⁻¹; None for GGLM.
    * **rho_hat** (float or None): Working correlation estimate.
    * **scale_hat** (float): Pearson dispersion estimate.
    * **qic** (float or None): QIC, only for independence fits.
    * **iterations** (int): Scoring iterations taken.
    * **converged**, **diverged** (bool): Outcome flags.
    * **corr** (str): Working correlation kind.
    * **method** (str): ``gglm``, ``gee`` or ``nodewise``.
    """

    estimates: PsiVector
    naive_cov: np.ndarray
    robust_cov: np.ndarray
    rho_hat: float
    scale_hat: float
    qic: float
    iterations: int
    converged: bool
    diverged: bool
    corr: str = INDEPENDENCE
    method: str = "gee"
    trace: tuple = field(default=(), repr=False)
    quasi_lik: QuasiLik = field(default=None, repr=False)

    @property
    def names(self):
        return self.estimates.names

    @property
    def covariance(self):
        """Robust covariance when available, the naive one otherwise."""
        return self.robust_cov if self.robust_cov is not None else self.naive_cov

    @property
    def standard_errors(self):
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def wald(self):
        """z statistics and two-sided normal p-values for ψ_i = 0."""
        se = self.standard_errors
        with np.errstate(divide="ignore", invalid="ignore"):
            z = self.estimates.vector / se
        return z, 2.0 * stats.norm.sf(np.abs(z))

    def summary(self):
        """Table of estimate, standard error, z and p-value per parameter."""
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

    def to_dict(self, include_trace=False):
        def matrix(values):
            return None if values is None else np.asarray(values).tolist()

        out = {
            "method": self.method,
            "corr": self.corr,
            "names": list(self.names),
            "estimates": [float(v) for v in self.estimates.vector],
            "naive_cov": matrix(self.naive_cov),
            "robust_cov": matrix(self.robust_cov),
            "rho_hat": None if self.rho_hat is None else float(self.rho_hat),
            "scale_hat": float(self.scale_hat),
            "qic": None if self.qic is None else float(self.qic),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "diverged": bool(self.diverged),
        }
        if include_trace:
            out["trace"] = list(self.trace)
        return out

    def to_json(self, include_trace=False):
        return json.dumps(self.to_dict(include_trace), sort_keys=True, indent=2)


def _as_corr(corr, rho=None):
    if isinstance(corr, WorkingCorrelation):
        return corr if rho is None else corr.with_rho(rho)
    return WorkingCorrelation(corr, rho)


def _conditional_means(design, psi):
    """Fitted conditional means, one (n, m) block per cluster."""
    Z, _ = design.blocks()
    return expit(Z @ psi)


def _scaled_rows(design, psi):
    """Z̃ = ν^½ Z and Pearson residuals r̃ = (y - μ)/ν^½ per cluster."""
    Z, Y = design.blocks()
    mu = _conditional_means(design, psi)
    clipped = np.clip(mu, MU_FLOOR, 1.0 - MU_FLOOR)
    sd = np.sqrt(clipped * (1.0 - clipped))
    return Z * sd[..., None], (Y - mu) / sd


def _bread_and_contributions(Zt, r, R_inv):
    """B = Σ Z̃ᵀR⁻¹Z̃ and the per-cluster terms u_k = Z̃_kᵀR⁻¹r̃_k."""
    RZ = np.einsum("ij,kjd->kid", R_inv, Zt)
    bread = np.einsum("kjd,kje->de", Zt, RZ)
    return (bread + bread.T) / 2.0, np.einsum("kjd,kj->kd", RZ, r)


def _independence_terms(design, psi, per_cluster=True):
    """Bread, score terms, Pearson residuals and means under R = I.

    Works node by node on the nonzero support of the rows: the bread is the
    sum of m per-node s×s blocks scattered into (p+q)². With
    ``per_cluster=False`` the score comes back summed over clusters.
    """
    support = design.node_support
    zn, znt = support.zn, support.znt
    m, n, s = zn.shape
    d = psi.size
    mu = expit(np.matmul(zn, psi[support.cols][:, :, None])[..., 0])
    clipped = np.clip(mu, MU_FLOOR, 1.0 - MU_FLOOR)
    var = clipped * (1.0 - clipped)
    resid = support.yn - mu
    blocks = np.matmul(znt * var[:, None, :], zn)
    bread = np.bincount(support.flat, weights=blocks.ravel(), minlength=d * d)
    bread = bread.reshape(d, d)
    if per_cluster:
        terms = (zn * resid[..., None]).transpose(1, 0, 2).reshape(n, m * s)
        contrib = terms @ support.scatter
    else:
        contrib = np.matmul(znt, resid[..., None]).ravel() @ support.scatter
    r = (resid / np.sqrt(var)).T
    return (bread + bread.T) / 2.0, contrib, r, mu


def _sandwich(bread, contrib):
    bread_inv = _invert(bread, "Bread matrix")
    robust = bread_inv @ (contrib.T @ contrib) @ bread_inv
    return bread_inv, (robust + robust.T) / 2.0


def _saturated(mu):
    return bool(np.any((mu < MU_FLOOR) | (mu > 1.0 - MU_FLOOR)))


def _inverse_correlation(corr, m):
    R = materialize_correlation(corr, m)
    if np.linalg.cond(R) < CONDITION_LIMIT:
        return np.linalg.inv(R)
    warnings.warn(
        "Working correlation {} with rho={} is near singular; adding a ridge "
        "of {}".format(corr.kind, corr.rho, RIDGE),
        stacklevel=3,
    )
    R = R + RIDGE * np.eye(m)
    if np.linalg.cond(R) >= CONDITION_LIMIT:
        raise SingularCovarianceError(
            "Working correlation stays singular after a ridge of {}".format(RIDGE)
        )
    return np.linalg.inv(R)


def _invert(matrix, what):
    try:
        inv = np.linalg.inv(matrix)
    except np.linalg.LinAlgError:
        raise RankDeficiencyError("{} is singular".format(what)) from None
    return (inv + inv.T) / 2.0


def estimate_correlation(kind, r, n_params):
    """Moment estimates (ρ̂, φ̂) from Pearson residuals ``r`` of shape (n, m).

    ρ̂ is clamped to 99% of the validity bound of ``kind``; the third value
    reports whether clamping happened. ρ̂ is None when it cannot be
    estimated: clusters of size one, or all residuals zero.
    """
    n, m = r.shape
    dof = max(r.size - n_params, 1)
    scale = float(np.sum(r**2) / dof)
    if kind == INDEPENDENCE:
        return None, scale, False
    if m < 2 or scale <= 0.0:
        return None, scale, False
    if kind == EXCHANGEABLE:
        totals = r.sum(axis=1)
        cross = float(np.sum((totals**2 - np.sum(r**2, axis=1)) / 2.0))
        pairs = n * m * (m - 1) / 2.0
    elif kind == AR1:
        cross = float(np.sum(r[:, :-1] * r[:, 1:]))
        pairs = n * (m - 1)
    else:
        raise ValueError("unknown correlation kind {!r}".format(kind))
    rho = cross / (scale * max(pairs - n_params, 1))
    lo, hi = correlation_bounds(kind, m)
    clamped = float(np.clip(rho, RHO_SHRINK * lo, RHO_SHRINK * hi))
    return clamped, scale, clamped != rho


def _check_columns(design):
    empty = design.node_support.empty
    if np.any(empty):
        raise RankDeficiencyError(
            "Design columns are identically zero: {}".format(
                ", ".join(n for n, e in zip(design.names, empty) if e)
            )
        )


def _initial_vector(design, init):
    d = design.z.shape[1]
    if init is None:
        return np.zeros(d)
    if isinstance(init, GeeFit):
        init = init.estimates
    if isinstance(init, PsiVector):
        init = init.as_dict()
    if isinstance(init, dict):
        return np.array([float(init.get(name, 0.0)) for name in design.names])
    values = np.asarray(init, dtype=float).ravel()
    if values.size != d:
        raise DimensionError(
            "init has {} values for {} design columns".format(values.size, d)
        )
    return values.copy()


def _terms(design, psi, corr, n_params, per_cluster=True):
    """Bread, score terms, residuals, means and ρ at ψ.

    ρ is re-estimated from the residuals unless ``corr`` carries one. With
    ``per_cluster=False`` the score is summed over clusters.
    """
    if corr.kind == INDEPENDENCE:
        bread, contrib, r, mu = _independence_terms(design, psi, per_cluster)
        return bread, contrib, r, mu, None
    Zt, r = _scaled_rows(design, psi)
    rho = corr.rho
    if rho is None:
        rho = estimate_correlation(corr.kind, r, n_params)[0]
    R_inv = _inverse_correlation(corr.with_rho(rho), design.m)
    bread, contrib = _bread_and_contributions(Zt, r, R_inv)
    if not per_cluster:
        contrib = contrib.sum(axis=0)
    return bread, contrib, r, _conditional_means(design, psi), rho


def _score(design, psi, corr, max_iter, tol, method):
    """Fisher scoring with ρ re-estimated before every ψ update.

    Divergence is any |ψ| above the threshold, a step that grows for
    GROWTH_LIMIT iterations in a row, or separation: a fitted mean pinned
    at the clipping floor while max|ψ| keeps growing for GROWTH_LIMIT
    iterations.
    """
    d = psi.size
    corr = corr.with_rho(None)
    trace = []
    converged = diverged = False
    growth = climb = 0
    last_norm = np.inf
    last_size = float(np.max(np.abs(psi), initial=0.0))
    rho = None
    iterations = 0
    for iterations in range(1, max_iter + 1):
        bread, score, _, mu, rho = _terms(design, psi, corr, d, per_cluster=False)
        try:
            step = np.linalg.solve(bread, score)
        except np.linalg.LinAlgError:
            raise RankDeficiencyError(
                "Bread matrix is singular at iteration {}".format(iterations)
            ) from None
        psi = psi + step
        step_max = float(np.max(np.abs(step))) if d else 0.0
        trace.append({"iteration": iterations, "max_step": step_max, "rho": rho})
        logger.debug(
            "%s iteration %d max|step|=%.3g rho=%s", method, iterations, step_max, rho
        )
        size = float(np.max(np.abs(psi), initial=0.0))
        if not np.all(np.isfinite(psi)) or size > DIVERGENCE_THRESHOLD:
            diverged = True
            break
        step_norm = float(np.linalg.norm(step))
        growth = growth + 1 if step_norm > last_norm else 0
        climb = climb + 1 if size > last_size and _saturated(mu) else 0
        last_norm, last_size = step_norm, size
        if growth >= GROWTH_LIMIT or climb >= GROWTH_LIMIT:
            diverged = True
            break
        if step_max < tol:
            converged = True
            break
    if diverged:
        warnings.warn(
            "{} diverged at iteration {} (max|psi|={:.3g}); the data may be "
            "separated".format(method, iterations, np.max(np.abs(psi), initial=0.0)),
            stacklevel=3,
        )
    return psi, iterations, converged, diverged, tuple(trace)


def _finalize(design, psi, corr, iterations, converged, diverged, trace, method, robust):
    d = psi.size
    estimates = design.psi(psi)
    if diverged:
        nan = np.full((d, d), np.nan)
        return GeeFit(
            estimates=estimates,
            naive_cov=nan,
            robust_cov=nan if robust else None,
            rho_hat=None,
            scale_hat=float("nan"),
            qic=None,
            iterations=iterations,
            converged=False,
            diverged=True,
            corr=corr.kind,
            method=method,
            trace=trace,
        )
    if corr.kind == INDEPENDENCE:
        bread, contrib, r, _ = _independence_terms(design, psi)
        rho, scale, clamped = None, estimate_correlation(INDEPENDENCE, r, d)[1], False
    else:
        Zt, r = _scaled_rows(design, psi)
        rho, scale, clamped = estimate_correlation(corr.kind, r, d)
        R_inv = _inverse_correlation(corr.with_rho(rho), design.m)
        bread, contrib = _bread_and_contributions(Zt, r, R_inv)
    if clamped:
        warnings.warn(
            "Estimated {} correlation was clamped to {:.6g}, 99% of its "
            "validity bound".format(corr.kind, rho),
            stacklevel=3,
        )
    naive, sandwich = _sandwich(bread, contrib)
    quasi_lik = None
    if corr.kind == INDEPENDENCE:
        quasi_lik = _quasi_likelihood(design, psi, sandwich, omega=bread)
    if not converged:
        logger.info("%s did not converge in %d iterations", method, iterations)
    return GeeFit(
        estimates=estimates,
        naive_cov=naive,
        robust_cov=sandwich if robust else None,
        rho_hat=rho,
        scale_hat=scale,
        qic=None if quasi_lik is None else quasi_lik.qic,
        iterations=iterations,
        converged=converged,
        diverged=False,
        corr=corr.kind,
        method=method,
        trace=trace,
        quasi_lik=quasi_lik,
    )


def _quasi_likelihood(design, psi, j_hat, omega=None):
    mu = np.clip(expit(design.z @ psi), QIC_CLAMP, 1.0 - QIC_CLAMP)
    y = design.y
    value = float(np.sum(y * np.log(mu) + (1.0 - y) * np.log(1.0 - mu)))
    if omega is None:
        omega = _independence_terms(design, psi)[0]
    return QuasiLik(value=value, omega_hat=omega, j_hat=j_hat)


def fit_gglm(design, max_iter=100, tol=1e-8, init=None):
    """Fit the pooled rows as one logistic GLM by IRLS, ignoring clustering.

    ``naive_cov`` is the inverse Fisher information of the pooled model;
    ``robust_cov`` is left out. QIC is still reported.

    ## Parameters

    * **design** (StackedDesign): Stacked rows.
    * **max_iter** (int, optional): Iteration cap, default 100.
    * **tol** (float, optional): Convergence threshold on max |Δψ|.
    * **init** (optional): Warm start; a PsiVector, GeeFit, name→value
      dict or plain vector.

    ## Returns
    `GeeFit` with ``method="gglm"``.

    ## Raises
    `RankDeficiencyError`: If a column is empty or the information is singular.

    ## Examples

    ```python
    fit = fit_gglm(expand_qebd(panel))
    fit.summary()
    ```
    """
    _check_columns(design)
    corr = WorkingCorrelation(INDEPENDENCE)
    psi, iterations, converged, diverged, trace = _score(
        design, _initial_vector(design, init), corr, max_iter, tol, "gglm"
    )
    return _finalize(
        design, psi, corr, iterations, converged, diverged, trace, "gglm", robust=False
    )


def fit_gee(design, corr=INDEPENDENCE, max_iter=100, tol=1e-8, init=None):
    """Solve the conditional-mean GEE under a working correlation.

    Scoring starts from the GGLM estimate unless ``init`` is given. Before
    every ψ update, ρ is re-estimated from Pearson residuals and clamped to
    99% of its validity bound. The sandwich is evaluated at the solution.

    ## Parameters

    * **design** (StackedDesign): Stacked rows.
    * **corr** (str or WorkingCorrelation): ``independence``,
      ``exchangeable`` or ``ar1``.
    * **max_iter** (int, optional): Iteration cap, default 100.
    * **tol** (float, optional): Convergence threshold on max |Δψ|.
    * **init** (optional): Warm start, as for `fit_gglm`.

    ## Returns
    `GeeFit`; divergence (|ψ| > 30, five growing steps in a row, or a
    saturated mean while |ψ| keeps climbing) and non-convergence are flags
    on it. Divergence also issues a `UserWarning`.

    ## Raises
    * `RankDeficiencyError`: If the bread matrix is singular.
    * `SingularCovarianceError`: If R_ρ stays singular after a ridge.
    """
    _check_columns(design)
    corr = _as_corr(corr)
    # under independence the scoring path is the GGLM path itself
    if init is None and corr.kind != INDEPENDENCE:
        start = fit_gglm(design, max_iter=max_iter, tol=tol)
        init = start.estimates.vector if start.converged else None
    psi, iterations, converged, diverged, trace = _score(
        design, _initial_vector(design, init), corr, max_iter, tol, "gee"
    )
    return _finalize(
        design, psi, corr, iterations, converged, diverged, trace, "gee", robust=True
    )


def fit_nodewise(design, j, max_iter=100, tol=1e-8, init=None):
    """Node-wise pseudo-likelihood fit of node j.

    Fits the rows of node j alone, after dropping the columns that are
    identically zero on them.
    """
    rows = design.node_rows(j)
    keep = [name for name, col in zip(rows.names, rows.z.T) if np.any(col != 0.0)]
    fit = fit_gglm(rows.select(keep), max_iter=max_iter, tol=tol, init=init)
    return replace(fit, method="nodewise")


def sandwich_covariance(design, psi_hat, corr=INDEPENDENCE, rho_hat=None):
    """Naive B̂⁻¹ and robust B̂⁻¹M̂B̂⁻¹ covariances at ψ̂.

    ## Returns
    Tuple ``(naive, robust)`` of (p+q)×(p+q) matrices; robust is symmetrized.

    ## Raises
    `RankDeficiencyError`: If B̂ is singular.
    """
    psi = psi_hat.vector if isinstance(psi_hat, PsiVector) else np.asarray(psi_hat, float)
    bread, contrib, _, _, _ = _terms(design, psi, _as_corr(corr, rho_hat), psi.size)
    return _sandwich(bread, contrib)


def quasi_likelihood(fit, design):
    """`QuasiLik` of an independence fit; GGLM fits get their sandwich here.

    ## Raises
    `QicUnavailableError`: If the fit used a non-independence working correlation.
    """
    if fit.corr != INDEPENDENCE:
        raise QicUnavailableError(fit.corr)
    if fit.quasi_lik is not None:
        return fit.quasi_lik
    psi = fit.estimates.vector
    j_hat = fit.robust_cov
    if j_hat is None:
        j_hat = sandwich_covariance(design, psi)[1]
    return _quasi_likelihood(design, psi, j_hat)


def qic(fit, design):
    """QIC = -2Q(ψ̂) + 2·trace(Ω̂Ĵ) for an independence fit.

    ## Raises
    `QicUnavailableError`: If the fit is not an independence fit.
    """
    return quasi_likelihood(fit, design).qic


def estimating_function_value(psi, corr, rho, panel, spec, per_cluster=False):
    """Evaluate φ(ψ; R_ρ) without solving.

    ## Parameters

    * **psi** (PsiVector or array_like): Parameter value.
    * **corr** (str or WorkingCorrelation): Working correlation kind.
    * **rho** (float or None): Correlation parameter; None keeps ``corr.rho``.
    * **panel** (BinaryPanel): Data.
    * **spec** (ModelSpec): Family used to expand the panel.
    * **per_cluster** (bool, optional): Return the n×(p+q) matrix of
      per-cluster contributions instead of their sum.

    ## Returns
    numpy.ndarray.
    """
    design = spec.expand(panel)
    psi = psi.vector if isinstance(psi, PsiVector) else np.asarray(psi, dtype=float)
    corr = _as_corr(corr, rho)
    R_inv = np.eye(design.m)
    if corr.kind != INDEPENDENCE:
        R_inv = _inverse_correlation(corr.with_rho(corr.rho or 0.0), design.m)
    Zt, r = _scaled_rows(design, psi)
    _, contrib = _bread_and_contributions(Zt, r, R_inv)
    return contrib if per_cluster else contrib.sum(axis=0)
