"""
Stacked per-node logistic designs.

Every conditional-mean family expands a panel into one row per (cluster k,
node j) with response y_kj and predictor z_kj = (x_kj, W_kj y⁰_k[j]). GGLM
and GEE both consume the same ``StackedDesign``.
"""

from collections import namedtuple
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import pandas as pd

from pyqebd.core.errors import CompatibilityError, DimensionError
from pyqebd.core.model import PsiVector, pair_indices

KERNEL_ATOL = 1e-12

NodeSupport = namedtuple(
    "NodeSupport", ["cols", "zn", "znt", "yn", "flat", "scatter", "empty"]
)


@dataclass(frozen=True)
class StackedDesign:
    """n·m stacked rows, ordered by cluster then node.

    ## Parameters

    * **z** (numpy.ndarray): (n·m) × (p+q) predictor matrix.
    * **y** (numpy.ndarray): Responses, length n·m.
    * **n** (int): Number of clusters.
    * **m** (int): Rows per cluster.
    * **names** (tuple of str): Column (parameter) names.
    * **p** (int): Number of leading main-effect columns.
    * **family** (str, optional): Family that produced the design.
    * **node_index** (numpy.ndarray, optional): Node id of each row;
      defaults to 0..m-1 repeated per cluster.
    """

    z: np.ndarray
    y: np.ndarray
    n: int
    m: int
    names: tuple
    p: int
    family: str = None
    node_index: np.ndarray = None

    def __post_init__(self):
        z = np.array(self.z, dtype=float)
        y = np.array(self.y, dtype=float).ravel()
        if z.ndim != 2:
            raise DimensionError("z must be 2-D, got shape {}".format(z.shape))
        if z.shape[0] != self.n * self.m or y.size != z.shape[0]:
            raise DimensionError(
                "expected {}·{} = {} rows, got z with {} and y with {}".format(
                    self.n, self.m, self.n * self.m, z.shape[0], y.size
                )
            )
        names = tuple(str(n) for n in self.names)
        if len(names) != z.shape[1] or len(set(names)) != len(names):
            raise DimensionError(
                "need {} distinct column names, got {!r}".format(z.shape[1], names)
            )
        if not 0 <= self.p <= z.shape[1]:
            raise DimensionError("p={} out of range".format(self.p))
        node_index = self.node_index
        if node_index is None:
            node_index = np.tile(np.arange(self.m), self.n)
        node_index = np.asarray(node_index, dtype=int)
        for name, arr in (("z", z), ("y", y), ("node_index", node_index)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "names", names)

    @property
    def q(self):
        return self.z.shape[1] - self.p

    @property
    def n_rows(self):
        return self.z.shape[0]

    @property
    def cluster_index(self):
        return np.repeat(np.arange(self.n), self.m)

    def cluster_slice(self, k):
        return slice(k * self.m, (k + 1) * self.m)

    def blocks(self):
        """(n, m, p+q) predictors and (n, m) responses, one block per cluster."""
        return self.z.reshape(self.n, self.m, -1), self.y.reshape(self.n, self.m)

    def column(self, name):
        try:
            return self.z[:, self.names.index(name)]
        except ValueError:
            raise KeyError("unknown column {!r}".format(name)) from None

    def psi(self, values):
        """Wrap a coefficient vector in this design's parameter layout."""
        return PsiVector.from_vector(values, self.names, self.p)

    @cached_property
    def node_support(self):
        """Node-major layout of the rows on their nonzero columns.

        Rows of node j are nonzero only on the columns ``cols[j]``. ``zn``
        holds those entries as an (m, n, s) array, zero-padded where a node
        has fewer than s columns, ``znt`` is its (m, s, n) transpose and
        ``yn`` the (m, n) responses. ``flat`` scatters per-node s×s blocks
        into a flattened (p+q)² matrix and ``scatter`` maps the m·s gathered
        entries of one cluster onto the p+q columns.
        """
        n, m, d = self.n, self.m, self.z.shape[1]
        z3 = self.z.reshape(n, m, d)
        support = np.any(z3 != 0.0, axis=0)
        s = max(int(support.sum(axis=1).max(initial=0)), 1)
        cols = np.zeros((m, s), dtype=int)
        mask = np.zeros((m, s), dtype=bool)
        for j in range(m):
            idx = np.flatnonzero(support[j])
            cols[j, : idx.size] = idx
            mask[j, : idx.size] = True
        zn = np.ascontiguousarray(
            (z3[:, np.arange(m)[:, None], cols] * mask).transpose(1, 0, 2)
        )
        znt = np.ascontiguousarray(zn.transpose(0, 2, 1))
        yn = np.ascontiguousarray(self.y.reshape(n, m).T)
        flat = (cols[:, :, None] * d + cols[:, None, :]).ravel()
        scatter = np.zeros((m * s, d))
        scatter[np.arange(m * s), cols.ravel()] = mask.ravel()
        for arr in (cols, zn, znt, yn, flat, scatter):
            arr.setflags(write=False)
        return NodeSupport(
            cols=cols,
            zn=zn,
            znt=znt,
            yn=yn,
            flat=flat,
            scatter=scatter,
            empty=~support.any(axis=0),
        )

    def node_rows(self, j):
        """The node-wise design of node j: its n rows, as clusters of size one."""
        if not 0 <= j < self.m:
            raise DimensionError("node index {} out of range for m={}".format(j, self.m))
        rows = slice(j, None, self.m)
        return StackedDesign(
            z=self.z[rows],
            y=self.y[rows],
            n=self.n,
            m=1,
            names=self.names,
            p=self.p,
            family=self.family,
            node_index=self.node_index[rows],
        )

    def select(self, names):
        """A design restricted to the named columns, in their current order."""
        keep = [i for i, name in enumerate(self.names) if name in set(names)]
        return StackedDesign(
            z=self.z[:, keep],
            y=self.y,
            n=self.n,
            m=self.m,
            names=[self.names[i] for i in keep],
            p=sum(1 for i in keep if i < self.p),
            family=self.family,
            node_index=self.node_index,
        )

    def to_frame(self):
        """Long-format table: cluster, node, y, z_1..z_{p+q} (1-based ids)."""
        frame = pd.DataFrame(
            self.z, columns=["z_{}".format(i + 1) for i in range(self.z.shape[1])]
        )
        frame.insert(0, "y", self.y.astype(int))
        frame.insert(0, "node", self.node_index + 1)
        frame.insert(0, "cluster", self.cluster_index + 1)
        return frame

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False, float_format="%.17g")


def check_covariates(X, n, m):
    """Normalize covariates to an (n, m, p) array."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = np.broadcast_to(X, (n,) + X.shape)
    if X.ndim != 3 or X.shape[:2] != (n, m):
        raise DimensionError(
            "covariates must have shape ({n}, {m}, p) or ({m}, p), got {}".format(
                X.shape, n=n, m=m
            )
        )
    return X


def _covariate_names(X, names):
    p = X.shape[2]
    if names is None:
        return ["beta{}".format(i) for i in range(p)]
    names = list(names)
    if len(names) != p:
        raise DimensionError("got {} covariate names for {} columns".format(len(names), p))
    return names


def _assemble(panel, main, inter, names, p, family):
    n, m = panel.n, panel.m
    z = np.concatenate([main, inter], axis=2).reshape(n * m, -1)
    return StackedDesign(
        z=z, y=panel.y.reshape(-1), n=n, m=m, names=names, p=p, family=family
    )


def qebd_pair_names(node_names, pairs):
    return ["{}:{}".format(node_names[a], node_names[b]) for a, b in pairs]


def expand_qebd(panel, pairs=None):
    """Expand a panel into the QEBD pseudo-likelihood design.

    Main effects are m one-hot columns. The θ_ab column equals y_kb on row
    (k, a), y_ka on row (k, b) and zero elsewhere, so z_kjᵀψ = β_j + (Θy⁰_k[j])_j.

    ## Parameters

    * **panel** (BinaryPanel): Observed clusters, m ≥ 2.
    * **pairs** (sequence of (int, int), optional): Interaction pairs to
      keep, zero-based with a < b; defaults to all pairs in θ order.

    ## Raises
    `DimensionError`: If ``m < 2`` or a pair is invalid.

    ## Examples

    ```python
    design = expand_qebd(BinaryPanel([[1, 0, 1]]))
    design.z[1, 3:]
    # array([1., 0., 1.])
    ```
    """
    n, m = panel.n, panel.m
    if m < 2:
        raise DimensionError("the QEBD design needs m >= 2, got m={}".format(m))
    if pairs is None:
        pairs = list(zip(*pair_indices(m)))
    pairs = [(int(a), int(b)) for a, b in pairs]
    for a, b in pairs:
        if not 0 <= a < b < m:
            raise DimensionError("invalid pair ({}, {}) for m={}".format(a, b, m))
    y = panel.y.astype(float)
    main = np.broadcast_to(np.eye(m), (n, m, m))
    inter = np.zeros((n, m, len(pairs)))
    if pairs:
        a_idx, b_idx = (np.array(v) for v in zip(*pairs))
        cols = np.arange(len(pairs))
        inter[:, a_idx, cols] = y[:, b_idx]
        inter[:, b_idx, cols] = y[:, a_idx]
    names = list(panel.node_names) + qebd_pair_names(panel.node_names, pairs)
    return _assemble(panel, main, inter, names, m, "qebd")


def expand_qelr_ci(panel, X, covariate_names=None, interaction_name="gamma"):
    """QELR with one common interaction: the γ column is Σ_s y_ks - y_kj.

    ``X`` holds the per-(cluster, node) covariates, shape (n, m, p), or
    (m, p) when shared across clusters.
    """
    X = check_covariates(X, panel.n, panel.m)
    y = panel.y.astype(float)
    inter = (y.sum(axis=1, keepdims=True) - y)[:, :, None]
    names = _covariate_names(X, covariate_names) + [interaction_name]
    return _assemble(panel, X, inter, names, X.shape[2], "qelr-ci")


def check_kernels(W, m, n=None):
    """Validate interaction kernels and return them as (L, m, m) or (n, L, m, m).

    The diagonal is ignored and returned as zero.

    ## Raises
    * `DimensionError`: If the kernel shape does not match m.
    * `CompatibilityError`: If a kernel is asymmetric or negative.
    """
    W = np.array(W, dtype=float)
    if W.ndim == 2:
        W = W[None]
    if W.shape[-2:] != (m, m) or W.ndim not in (3, 4):
        raise DimensionError(
            "kernels must have shape (L, {m}, {m}) or (n, L, {m}, {m}), got {}".format(
                W.shape, m=m
            )
        )
    if W.ndim == 4 and n is not None and W.shape[0] != n:
        raise DimensionError(
            "per-cluster kernels cover {} clusters, panel has {}".format(W.shape[0], n)
        )
    if not np.allclose(W, np.swapaxes(W, -1, -2), rtol=0.0, atol=KERNEL_ATOL):
        raise CompatibilityError(
            "Interaction kernels must be symmetric in (i, j); asymmetric full "
            "conditionals do not define a unique joint distribution."
        )
    off_diag = ~np.eye(m, dtype=bool)
    if np.any(W[..., off_diag] < 0):
        raise CompatibilityError("Interaction kernels must be nonnegative.")
    W[..., ~off_diag] = 0.0
    return W


def expand_qelr_linear(panel, X, W, covariate_names=None, kernel_names=None):
    """QELR with linear interactions: the γ_ℓ column is Σ_{i≠j} w^ℓ_ij y_ki.

    ## Parameters

    * **panel** (BinaryPanel): Observed clusters.
    * **X** (array_like): Covariates, (n, m, p) or (m, p).
    * **W** (array_like): Kernels, (L, m, m) shared or (n, L, m, m) per cluster.
    * **covariate_names**, **kernel_names** (sequence of str, optional):
      Column names; default ``beta0..`` and ``gamma1..gammaL``.

    ## Raises
    `CompatibilityError`: If a kernel is asymmetric or negative.
    """
    n, m = panel.n, panel.m
    X = check_covariates(X, n, m)
    W = check_kernels(W, m, n)
    y = panel.y.astype(float)
    if W.ndim == 3:
        inter = np.einsum("lji,ki->kjl", W, y)
    else:
        inter = np.einsum("klji,ki->kjl", W, y)
    L = inter.shape[2]
    if kernel_names is None:
        kernel_names = ["gamma{}".format(i + 1) for i in range(L)]
    kernel_names = list(kernel_names)
    if len(kernel_names) != L:
        raise DimensionError("got {} kernel names for {} kernels".format(len(kernel_names), L))
    names = _covariate_names(X, covariate_names) + kernel_names
    return _assemble(panel, X, inter, names, X.shape[2], "qelr-linear")


def expand_markov(panel, X, order=1, lags=None, covariate_names=None):
    """Transition-model design: row (k, t) carries x_kt and the lagged responses.

    A lag reaching before the first time point is filled with zero.

    ## Parameters

    * **panel** (BinaryPanel): One series per cluster, time along columns.
    * **X** (array_like): Time-varying covariates, (n, m, p) or (m, p).
    * **order** (int, optional): Markov order q ≥ 1, default 1.
    * **lags** (sequence of int, optional): Subset of lags 1..q to keep.

    ## Examples

    ```python
    design = expand_markov(BinaryPanel([[1, 0, 1, 1]]), np.ones((4, 1)), order=2)
    design.z[:, 1:]
    # array([[0., 0.], [1., 0.], [0., 1.], [1., 0.]])
    ```
    """
    if order < 1:
        raise DimensionError("Markov order must be >= 1, got {}".format(order))
    n, m = panel.n, panel.m
    X = check_covariates(X, n, m)
    lags = list(range(1, order + 1)) if lags is None else [int(s) for s in lags]
    for s in lags:
        if not 1 <= s <= order:
            raise DimensionError("lag {} outside 1..{}".format(s, order))
    y = panel.y.astype(float)
    inter = np.zeros((n, m, len(lags)))
    for c, s in enumerate(lags):
        if s < m:
            inter[:, s:, c] = y[:, : m - s]
    names = _covariate_names(X, covariate_names) + ["gamma{}".format(s) for s in lags]
    return _assemble(panel, X, inter, names, X.shape[2], "markov")
