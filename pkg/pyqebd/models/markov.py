import numpy as np

from pyqebd.core.design import expand_markov
from pyqebd.core.errors import DimensionError
from pyqebd.core.model import expit
from pyqebd.models.qelr import CovariateSpec


def markov_covariates(smoking, times):
    """Covariates (1, S, t) of the first-order transition model, one row per time.

    ## Parameters

    * **smoking** (array_like): Binary covariate S, one value per cluster.
    * **times** (sequence of int): Time values, one per response column.

    ## Returns
    numpy.ndarray of shape (n, len(times), 3).
    """
    smoking = np.asarray(smoking, dtype=float).ravel()
    times = np.asarray(times, dtype=float).ravel()
    n, m = smoking.size, times.size
    X = np.empty((n, m, 3))
    X[:, :, 0] = 1.0
    X[:, :, 1] = smoking[:, None]
    X[:, :, 2] = times[None, :]
    return X


class MarkovSpec(CovariateSpec):
    """Markov transition model of order q: logit π_kt = x_ktᵀβ + Σ_s γ_s y_k(t-s).

    Lags reaching before the first observation are zero.

    ## Parameters

    * **X** (array_like): Time-varying covariates, (n, m, p) or (m, p).
    * **order** (int, optional): q ≥ 1, default 1.
    * **lags** (sequence of int, optional): Lags kept in the model.
    * **covariate_names** (sequence of str, optional): Default ``beta0..``.
    """

    family = "markov"

    def __init__(self, X, order=1, lags=None, covariate_names=None):
        super().__init__(X, covariate_names)
        if order < 1:
            raise DimensionError("Markov order must be >= 1, got {}".format(order))
        self.order = int(order)
        self.lags = tuple(range(1, order + 1)) if lags is None else tuple(
            sorted(int(s) for s in lags)
        )

    @property
    def interaction_terms(self):
        return tuple("gamma{}".format(s) for s in self.lags)

    def expand(self, panel):
        return expand_markov(
            panel,
            self.covariates(panel),
            order=self.order,
            lags=self.lags,
            covariate_names=self.covariate_names,
        )

    def drop(self, term):
        if term not in self.interaction_terms:
            raise KeyError("{!r} is not an interaction of this model".format(term))
        lags = [s for s, t in zip(self.lags, self.interaction_terms) if t != term]
        return MarkovSpec(
            self.X, order=self.order, lags=lags, covariate_names=self.covariate_names
        )

    def lagged(self, panel):
        """(n, m, len(lags)) lagged responses with zero fill."""
        y = panel.y.astype(float)
        out = np.zeros(y.shape + (len(self.lags),))
        for c, s in enumerate(self.lags):
            if s < panel.m:
                out[:, s:, c] = y[:, : panel.m - s]
        return out

    def conditional_mean(self, psi, panel):
        eta = self.linear_predictor(psi.beta, panel)
        eta = eta + self.lagged(panel) @ np.asarray(psi.gamma)
        return expit(eta)

    def to_dict(self):
        out = super().to_dict()
        out["order"] = self.order
        return out
