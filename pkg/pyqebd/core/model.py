"""
Shared domain types: binary panels, parameter vectors, the Θ↔θ packing,
the G matrix, working correlations and the logit link.

All value objects are immutable after construction. Arrays handed in are
copied and flagged read-only, so instances can be shared between threads.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from pyqebd.core.errors import DimensionError, DomainError

INDEPENDENCE = "independence"
EXCHANGEABLE = "exchangeable"
AR1 = "ar1"

CORRELATION_KINDS = (INDEPENDENCE, EXCHANGEABLE, AR1)
CORRELATION_ALIASES = {
    "ind": INDEPENDENCE,
    "independence": INDEPENDENCE,
    "exc": EXCHANGEABLE,
    "exchangeable": EXCHANGEABLE,
    "ar1": AR1,
}


def _frozen(values, dtype=float):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def n_pairs(m):
    """Number of unordered node pairs, m(m-1)/2."""
    return m * (m - 1) // 2


def pair_indices(m):
    """Return the (j1, j2) index arrays of the θ packing order.

    The order is row-of-upper-triangle: (1,2), (1,3), ..., (1,m), (2,3), ...
    which is exactly what ``numpy.triu_indices`` yields.
    """
    return np.triu_indices(m, k=1)


def theta_to_matrix(theta, m):
    """Unpack θ into the symmetric, zero-diagonal m×m matrix Θ.

    ## Parameters

    * **theta** (array_like): Packed interaction vector of length m(m-1)/2.
    * **m** (int): Number of responses per cluster.

    ## Returns
    numpy.ndarray: The m×m matrix Θ.

    ## Raises
    `DimensionError`: If ``len(theta) != m(m-1)/2``.

    ## Examples

    ```python
    theta_to_matrix([0.7], 2)
    # array([[0. , 0.7],
    #        [0.7, 0. ]])
    ```
    """
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.size != n_pairs(m):
        raise DimensionError(
            "theta has length {}, expected m(m-1)/2 = {} for m={}".format(
                theta.size, n_pairs(m), m
            )
        )
    mat = np.zeros((m, m))
    rows, cols = pair_indices(m)
    mat[rows, cols] = theta
    mat[cols, rows] = theta
    return mat


def matrix_to_theta(mat):
    """Pack the upper triangle of a square matrix into θ."""
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DimensionError("expected a square matrix, got shape {}".format(mat.shape))
    rows, cols = pair_indices(mat.shape[0])
    return mat[rows, cols].copy()


def vec(mat):
    """Column-major vectorization, vec(C) = (c11, c21, ..., c12, c22, ...)."""
    return np.asarray(mat).reshape(-1, order="F")


def build_g_matrix(m):
    """Build G, the m(m-1)/2 × m² matrix with vec(Θ) = Gᵀθ.

    Row (i, j) of G is e_i⊗e_j + e_j⊗e_i, so it holds a one at the
    column-major positions of entries (i, j) and (j, i).

    ## Raises
    `DimensionError`: If ``m < 2``.
    """
    if m < 2:
        raise DimensionError("G is defined for m >= 2, got m={}".format(m))
    rows, cols = pair_indices(m)
    g = np.zeros((n_pairs(m), m * m))
    idx = np.arange(rows.size)
    # column-major position of entry (r, c) is c*m + r
    g[idx, cols * m + rows] = 1.0
    g[idx, rows * m + cols] = 1.0
    return g


def expit(x):
    """Inverse logit, 1 / (1 + exp(-x))."""
    return special.expit(x)


def logit(p):
    """Log-odds of a probability in the open interval (0, 1).

    ## Raises
    `DomainError`: If any entry of ``p`` is outside (0, 1).
    """
    arr = np.asarray(p, dtype=float)
    if np.any((arr <= 0.0) | (arr >= 1.0)) or np.any(np.isnan(arr)):
        raise DomainError("logit requires probabilities strictly inside (0, 1)")
    return special.logit(arr)


def variance_fn(mu):
    """Binary variance function μ(1-μ)."""
    mu = np.asarray(mu, dtype=float)
    return mu * (1.0 - mu)


@dataclass(frozen=True)
class LinkState:
    """Conditional means μ and variance-function values ν = μ(1-μ)."""

    mu: np.ndarray
    nu: np.ndarray

    @classmethod
    def from_linear_predictor(cls, eta):
        mu = expit(np.asarray(eta, dtype=float))
        return cls(mu=mu, nu=variance_fn(mu))


@dataclass(frozen=True)
class BinaryPanel:
    """n independent clusters of m binary responses.

    ## Parameters

    * **y** (array_like): n×m matrix of zeros and ones.
    * **node_names** (sequence of str, optional): One label per response;
      defaults to ``y1 .. ym``.

    ## Raises
    * `DimensionError`: If ``y`` is not a non-empty 2-D array.
    * `DomainError`: If any entry is not exactly 0 or 1.
    """

    y: np.ndarray
    node_names: tuple = field(default=None)

    def __post_init__(self):
        raw = np.asarray(self.y)
        if raw.ndim != 2 or raw.shape[0] < 1 or raw.shape[1] < 1:
            raise DimensionError(
                "a panel needs shape (n, m) with n >= 1 and m >= 1, got {}".format(
                    raw.shape
                )
            )
        if not np.all((raw == 0) | (raw == 1)):
            raise DomainError("panel entries must be exactly 0 or 1")
        object.__setattr__(self, "y", _frozen(raw, dtype=np.int8))
        names = self.node_names
        if names is None:
            names = tuple("y{}".format(j + 1) for j in range(raw.shape[1]))
        names = tuple(str(n) for n in names)
        if len(names) != raw.shape[1] or len(set(names)) != len(names):
            raise DimensionError(
                "node_names must hold {} distinct labels".format(raw.shape[1])
            )
        object.__setattr__(self, "node_names", names)

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def m(self):
        return self.y.shape[1]

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class QebdParams:
    """Main effects β (length m) and packed interactions θ (length m(m-1)/2)."""

    beta: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float).ravel()
        theta = np.asarray(self.theta, dtype=float).ravel()
        m = beta.size
        if m < 1:
            raise DimensionError("beta must have at least one entry")
        if theta.size != n_pairs(m):
            raise DimensionError(
                "theta has length {}, expected {} for m={}".format(
                    theta.size, n_pairs(m), m
                )
            )
        if not (np.all(np.isfinite(beta)) and np.all(np.isfinite(theta))):
            raise DomainError("QEBD parameters must be finite")
        object.__setattr__(self, "beta", _frozen(beta))
        object.__setattr__(self, "theta", _frozen(theta))

    @property
    def m(self):
        return self.beta.size

    @property
    def Theta(self):
        return theta_to_matrix(self.theta, self.m)

    @property
    def vector(self):
        return np.concatenate([self.beta, self.theta])

    @classmethod
    def from_vector(cls, values, m):
        values = np.asarray(values, dtype=float).ravel()
        if values.size != m + n_pairs(m):
            raise DimensionError(
                "expected {} values for m={}, got {}".format(
                    m + n_pairs(m), m, values.size
                )
            )
        return cls(beta=values[:m], theta=values[m:])

    @classmethod
    def zeros(cls, m):
        return cls(beta=np.zeros(m), theta=np.zeros(n_pairs(m)))

    def names(self, node_names=None):
        """Parameter labels: node names, then ``a:b`` for each pair."""
        node_names = node_names or ["y{}".format(j + 1) for j in range(self.m)]
        rows, cols = pair_indices(self.m)
        return list(node_names) + [
            "{}:{}".format(node_names[a], node_names[b]) for a, b in zip(rows, cols)
        ]


@dataclass(frozen=True)
class PsiVector:
    """ψ = (βᵀ, γᵀ)ᵀ with a bijective name↔index layout.

    ``p`` main-effect coefficients come first, followed by ``q`` interaction
    coefficients.
    """

    beta: np.ndarray
    gamma: np.ndarray
    names: tuple

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float).ravel()
        gamma = np.asarray(self.gamma, dtype=float).ravel()
        names = tuple(str(n) for n in self.names)
        if beta.size + gamma.size < 1:
            raise DimensionError("psi needs at least one coefficient")
        if len(names) != beta.size + gamma.size:
            raise DimensionError(
                "got {} names for {} coefficients".format(
                    len(names), beta.size + gamma.size
                )
            )
        if len(set(names)) != len(names):
            raise DimensionError("parameter names must be unique")
        object.__setattr__(self, "beta", _frozen(beta))
        object.__setattr__(self, "gamma", _frozen(gamma))
        object.__setattr__(self, "names", names)

    @classmethod
    def from_vector(cls, values, names, p):
        values = np.asarray(values, dtype=float).ravel()
        return cls(beta=values[:p], gamma=values[p:], names=names)

    @property
    def p(self):
        return self.beta.size

    @property
    def q(self):
        return self.gamma.size

    @property
    def vector(self):
        return np.concatenate([self.beta, self.gamma])

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError("unknown parameter {!r}".format(name)) from None

    def __getitem__(self, name):
        return float(self.vector[self.index(name)])

    def __len__(self):
        return len(self.names)

    def as_dict(self):
        return {n: float(v) for n, v in zip(self.names, self.vector)}


def normalize_correlation_kind(kind):
    """Resolve ``ind``/``exc``/``ar1`` style aliases to a canonical kind."""
    try:
        return CORRELATION_ALIASES[str(kind).lower()]
    except KeyError:
        raise ValueError(
            "correlation must be one of {}, got {!r}".format(
                sorted(CORRELATION_ALIASES), kind
            )
        ) from None


def correlation_bounds(kind, m):
    """Open interval of valid ρ for a working correlation kind and size m."""
    kind = normalize_correlation_kind(kind)
    if kind == INDEPENDENCE or m < 2:
        return (-np.inf, np.inf)
    if kind == EXCHANGEABLE:
        return (-1.0 / (m - 1), 1.0)
    return (-1.0, 1.0)


@dataclass(frozen=True)
class WorkingCorrelation:
    """A working correlation structure R_ρ.

    ## Parameters

    * **kind** (str): ``independence``, ``exchangeable`` or ``ar1``
      (``ind``/``exc`` accepted).
    * **rho** (float, optional): Correlation parameter, ignored (and stored
      as None) for independence.
    """

    kind: str
    rho: float = None

    def __post_init__(self):
        kind = normalize_correlation_kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind == INDEPENDENCE:
            object.__setattr__(self, "rho", None)
        elif self.rho is not None:
            object.__setattr__(self, "rho", float(self.rho))

    @property
    def is_diagonal(self):
        return self.kind == INDEPENDENCE

    def with_rho(self, rho):
        return WorkingCorrelation(self.kind, rho)


def materialize_correlation(spec, m):
    """Build the m×m matrix R_ρ for a working correlation.

    ## Parameters

    * **spec** (WorkingCorrelation or str): The structure; a bare string is
      read as a kind with ρ = 0.
    * **m** (int): Cluster size.

    ## Returns
    numpy.ndarray: Symmetric, unit-diagonal, positive definite matrix.

    ## Raises
    `DomainError`: If ρ lies outside the validity bound of the kind.

    ## Examples

    ```python
    materialize_correlation(WorkingCorrelation("ar1", 0.5), 3)[0]
    # array([1.  , 0.5 , 0.25])
    ```
    """
    if not isinstance(spec, WorkingCorrelation):
        spec = WorkingCorrelation(spec, 0.0)
    if spec.kind == INDEPENDENCE or m == 1:
        return np.eye(m)
    rho = 0.0 if spec.rho is None else spec.rho
    lo, hi = correlation_bounds(spec.kind, m)
    if not (lo < rho < hi):
        raise DomainError(
            "rho={} is outside the {} bound ({:.6g}, {:.6g}) for m={}".format(
                rho, spec.kind, lo, hi, m
            )
        )
    if spec.kind == EXCHANGEABLE:
        mat = np.full((m, m), rho)
        np.fill_diagonal(mat, 1.0)
        return mat
    lags = np.abs(np.subtract.outer(np.arange(m), np.arange(m)))
    return rho**lags


class ModelSpec:
    """Base class of the conditional-mean model families.

    A model spec knows how to expand a panel into the stacked per-node
    logistic design, which interaction terms it carries, and how to evaluate
    its conditional means directly from the model formula. Family classes
    live in ``pyqebd.models``.
    """

    family = None

    def expand(self, panel):
        raise NotImplementedError

    @property
    def interaction_terms(self):
        raise NotImplementedError

    def drop(self, term):
        """Return a copy of this spec without the interaction ``term``."""
        raise NotImplementedError

    def conditional_mean(self, psi, panel):
        """n×m matrix of Pr(Y_kj = 1 | rest) evaluated from the formula."""
        raise NotImplementedError

    def to_dict(self):
        return {"family": self.family, "interactions": list(self.interaction_terms)}

    def __repr__(self):
        return "{}({})".format(
            type(self).__name__, ", ".join(self.interaction_terms) or "no interactions"
        )
