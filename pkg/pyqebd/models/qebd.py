import numpy as np

from pyqebd.core.design import expand_qebd, qebd_pair_names
from pyqebd.core.errors import DimensionError
from pyqebd.core.model import (
    BinaryPanel,
    ModelSpec,
    PsiVector,
    QebdParams,
    expit,
    n_pairs,
    pair_indices,
)


class QebdSpec(ModelSpec):
    """Quadratic exponential binary distribution: logit μ_j = β_j + (Θy⁰_[j])_j.

    ## Parameters

    * **m** (int): Responses per cluster, m ≥ 2.
    * **pairs** (sequence of (int, int), optional): Interaction pairs kept in
      the model, zero-based with a < b. Defaults to every pair.
    * **node_names** (sequence of str, optional): Node labels used in
      parameter names; default ``y1 .. ym``.

    ## Examples

    ```python
    spec = QebdSpec(3)
    spec.interaction_terms
    # ('y1:y2', 'y1:y3', 'y2:y3')
    spec.drop("y1:y3").interaction_terms
    # ('y1:y2', 'y2:y3')
    ```
    """

    family = "qebd"

    def __init__(self, m, pairs=None, node_names=None):
        if m < 2:
            raise DimensionError("a QEBD needs m >= 2, got m={}".format(m))
        self.m = m
        self.node_names = tuple(
            node_names or ("y{}".format(j + 1) for j in range(m))
        )
        if len(self.node_names) != m:
            raise DimensionError("need {} node names".format(m))
        all_pairs = [(int(a), int(b)) for a, b in zip(*pair_indices(m))]
        if pairs is None:
            pairs = all_pairs
        keep = {(int(a), int(b)) for a, b in pairs}
        # packing order is preserved whatever order the caller used
        self.pairs = tuple(p for p in all_pairs if p in keep)
        if len(self.pairs) != len(keep):
            raise DimensionError("invalid pairs for m={}: {!r}".format(m, pairs))

    @classmethod
    def for_panel(cls, panel, interactions=True):
        pairs = None if interactions else []
        return cls(panel.m, pairs=pairs, node_names=panel.node_names)

    @property
    def interaction_terms(self):
        return tuple(qebd_pair_names(self.node_names, self.pairs))

    @property
    def names(self):
        return tuple(self.node_names) + self.interaction_terms

    def _relabel(self, panel):
        if panel.m != self.m:
            raise DimensionError(
                "panel has m={}, model expects m={}".format(panel.m, self.m)
            )
        if panel.node_names != self.node_names:
            panel = BinaryPanel(panel.y, node_names=self.node_names)
        return panel

    def expand(self, panel):
        return expand_qebd(self._relabel(panel), pairs=self.pairs)

    def drop(self, term):
        terms = self.interaction_terms
        if term not in terms:
            raise KeyError("{!r} is not an interaction of this model".format(term))
        pairs = [p for p, t in zip(self.pairs, terms) if t != term]
        return QebdSpec(self.m, pairs=pairs, node_names=self.node_names)

    def theta_matrix(self, psi):
        """Θ implied by ψ, with zeros for the pairs not in the model."""
        gamma = np.asarray(psi.gamma if isinstance(psi, PsiVector) else psi, dtype=float)
        Theta = np.zeros((self.m, self.m))
        for (a, b), value in zip(self.pairs, gamma):
            Theta[a, b] = Theta[b, a] = value
        return Theta

    def conditional_mean(self, psi, panel):
        y = self._relabel(panel).y.astype(float)
        return expit(psi.beta + y @ self.theta_matrix(psi))

    def psi_from_params(self, params):
        rows, cols = pair_indices(self.m)
        position = {(a, b): i for i, (a, b) in enumerate(zip(rows, cols))}
        gamma = [params.theta[position[p]] for p in self.pairs]
        return PsiVector(beta=params.beta, gamma=gamma, names=self.names)

    def params_from_psi(self, psi):
        rows, cols = pair_indices(self.m)
        Theta = self.theta_matrix(psi)
        theta = Theta[rows, cols] if n_pairs(self.m) else np.zeros(0)
        return QebdParams(beta=psi.beta, theta=theta)

    def to_dict(self):
        out = super().to_dict()
        out["m"] = self.m
        out["node_names"] = list(self.node_names)
        return out
