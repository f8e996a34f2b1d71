import numpy as np

from pyqebd.core.design import (
    check_covariates,
    check_kernels,
    expand_qelr_ci,
    expand_qelr_linear,
)
from pyqebd.core.errors import DimensionError
from pyqebd.core.model import ModelSpec, expit


def equal_kernel(u_i, u_j):
    """Equality-indicator similarity, 1 when the characteristics match."""
    return float(np.all(np.asarray(u_i) == np.asarray(u_j)))


def discrete_kernel(u_i, u_j):
    """Discrete metric, 0 when the characteristics match and 1 otherwise."""
    return 1.0 - equal_kernel(u_i, u_j)


class CovariateSpec(ModelSpec):
    """Shared handling of the per-(cluster, node) covariates X."""

    def __init__(self, X, covariate_names=None):
        X = np.asarray(X, dtype=float)
        if X.ndim not in (2, 3):
            raise DimensionError(
                "covariates must have shape (n, m, p) or (m, p), got {}".format(X.shape)
            )
        self.X = X
        p = X.shape[-1]
        self.covariate_names = tuple(
            covariate_names or ("beta{}".format(i) for i in range(p))
        )
        if len(self.covariate_names) != p:
            raise DimensionError(
                "got {} covariate names for {} columns".format(
                    len(self.covariate_names), p
                )
            )

    @property
    def p(self):
        return self.X.shape[-1]

    def covariates(self, panel):
        return check_covariates(self.X, panel.n, panel.m)

    def linear_predictor(self, beta, panel):
        return np.einsum("kjp,p->kj", self.covariates(panel), np.asarray(beta))

    def to_dict(self):
        out = super().to_dict()
        out["covariates"] = list(self.covariate_names)
        return out


class QelrCiSpec(CovariateSpec):
    """QELR with a common interaction: logit μ_j = x_jᵀβ + γ(Σ_s y_s - y_j).

    With ``interaction=False`` the model is the marginal logistic model.
    """

    family = "qelr-ci"

    def __init__(self, X, covariate_names=None, interaction=True, interaction_name="gamma"):
        super().__init__(X, covariate_names)
        self.interaction = bool(interaction)
        self.interaction_name = interaction_name

    @property
    def interaction_terms(self):
        return (self.interaction_name,) if self.interaction else ()

    def expand(self, panel):
        design = expand_qelr_ci(
            panel,
            self.covariates(panel),
            covariate_names=self.covariate_names,
            interaction_name=self.interaction_name,
        )
        if not self.interaction:
            design = design.select(self.covariate_names)
        return design

    def drop(self, term):
        if term not in self.interaction_terms:
            raise KeyError("{!r} is not an interaction of this model".format(term))
        return QelrCiSpec(
            self.X,
            self.covariate_names,
            interaction=False,
            interaction_name=self.interaction_name,
        )

    def theta_matrix(self, gamma, m):
        gamma = float(np.atleast_1d(gamma)[0]) if self.interaction else 0.0
        return gamma * (np.ones((m, m)) - np.eye(m))

    def conditional_mean(self, psi, panel):
        y = panel.y.astype(float)
        eta = self.linear_predictor(psi.beta, panel)
        if self.interaction:
            eta = eta + psi.gamma[0] * (y.sum(axis=1, keepdims=True) - y)
        return expit(eta)


class QelrLinearSpec(CovariateSpec):
    """QELR with linear interactions: logit μ_j = x_jᵀβ + Σ_ℓ γ_ℓ Σ_{i≠j} w^ℓ_ij y_i.

    ## Parameters

    * **X** (array_like): Covariates, (n, m, p) or (m, p).
    * **W** (array_like): Symmetric nonnegative kernels, (L, m, m) or
      (n, L, m, m) when they differ between clusters.
    * **covariate_names** (sequence of str, optional): Default ``beta0..``.
    * **kernel_names** (sequence of str, optional): Default ``gamma1..gammaL``.

    ## Raises
    `CompatibilityError`: If a kernel is asymmetric or negative.
    """

    family = "qelr-linear"

    def __init__(self, X, W, covariate_names=None, kernel_names=None):
        super().__init__(X, covariate_names)
        W = np.asarray(W, dtype=float)
        m = W.shape[-1]
        self.W = check_kernels(W, m)
        L = self.W.shape[-3]
        self.kernel_names = tuple(
            kernel_names or ("gamma{}".format(i + 1) for i in range(L))
        )
        if len(self.kernel_names) != L:
            raise DimensionError(
                "got {} kernel names for {} kernels".format(len(self.kernel_names), L)
            )

    @property
    def interaction_terms(self):
        return self.kernel_names

    def expand(self, panel):
        return expand_qelr_linear(
            panel,
            self.covariates(panel),
            self.W,
            covariate_names=self.covariate_names,
            kernel_names=self.kernel_names,
        )

    def drop(self, term):
        if term not in self.kernel_names:
            raise KeyError("{!r} is not an interaction of this model".format(term))
        keep = [i for i, name in enumerate(self.kernel_names) if name != term]
        return QelrLinearSpec(
            self.X,
            self.W[..., keep, :, :],
            covariate_names=self.covariate_names,
            kernel_names=[self.kernel_names[i] for i in keep],
        )

    def theta_matrix(self, gamma, m=None):
        """Σ_ℓ γ_ℓ W^ℓ, (m, m) or (n, m, m) for per-cluster kernels."""
        return np.tensordot(np.asarray(gamma, dtype=float), self.W, axes=([0], [-3]))

    def conditional_mean(self, psi, panel):
        y = panel.y.astype(float)
        eta = self.linear_predictor(psi.beta, panel)
        Theta = self.theta_matrix(psi.gamma)
        if Theta.ndim == 2:
            eta = eta + y @ Theta
        else:
            eta = eta + np.einsum("ki,kij->kj", y, Theta)
        return expit(eta)
