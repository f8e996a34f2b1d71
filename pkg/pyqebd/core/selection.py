"""
QIC-based backward elimination over the interaction terms of a model.
"""

import json
import logging
import warnings
from dataclasses import dataclass

import pandas as pd

from pyqebd.core.errors import QebdError
from pyqebd.core.gee import fit_gee
from pyqebd.core.model import INDEPENDENCE
from pyqebd.core.util import concurrent_map

logger = logging.getLogger(__name__)

QIC_TIE = 1e-9


@dataclass(frozen=True)
class EliminationStep:
    term: str
    qic_before: float
    qic_after: float


@dataclass(frozen=True)
class EliminationTrace:
    """Accepted deletions in order, with the surviving model and its fit.

    ``skipped`` lists ``(step, term, reason)`` for candidate refits that
    diverged or failed and were left out of the comparison.
    """

    steps: tuple
    final_spec: object
    final_fit: object
    initial_qic: float
    skipped: tuple = ()

    @property
    def dropped(self):
        return [step.term for step in self.steps]

    @property
    def final_qic(self):
        return self.final_fit.qic

    def to_dict(self):
        return {
            "initial_qic": float(self.initial_qic),
            "final_qic": float(self.final_qic),
            "steps": [
                {
                    "term": s.term,
                    "qic_before": float(s.qic_before),
                    "qic_after": float(s.qic_after),
                }
                for s in self.steps
            ],
            "skipped": [
                {"step": step, "term": term, "reason": reason}
                for step, term, reason in self.skipped
            ],
            "final_model": self.final_spec.to_dict(),
            "final_fit": self.final_fit.to_dict(),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_table(self):
        """Aligned text table of the accepted steps."""
        if not self.steps:
            return "no interaction removed (QIC {:.3f})".format(self.initial_qic)
        frame = pd.DataFrame(
            [(i + 1, s.term, s.qic_before, s.qic_after) for i, s in enumerate(self.steps)],
            columns=["step", "dropped", "qic_before", "qic_after"],
        )
        return frame.to_string(index=False, float_format=lambda v: "{:.3f}".format(v))


def _refit(spec, panel, init, max_iter, tol):
    return fit_gee(spec.expand(panel), INDEPENDENCE, max_iter=max_iter, tol=tol, init=init)


def backward_eliminate(
    spec,
    panel,
    protect=None,
    max_iter=100,
    tol=1e-8,
    warm_start=True,
    thread_pool_executor=None,
    max_workers=1,
):
    """Greedy QIC backward elimination of interaction terms.

    Every step refits all single-interaction deletions under independence
    and keeps the one with the lowest QIC, provided it is strictly lower
    than the current QIC. Ties within 1e-9 go to the term with the larger
    robust p-value in the current fit. Main effects are never candidates.

    ## Parameters

    * **spec** (ModelSpec): Full model.
    * **panel** (BinaryPanel): Data.
    * **protect** (iterable of str, optional): Interaction terms that must stay.
    * **warm_start** (bool, optional): Start candidate refits at the
      current estimates; the optimum reached does not depend on it.
    * **thread_pool_executor** (callable, optional): Executor class for
      concurrent candidate refits.
    * **max_workers** (int, optional): Worker count, default 1 (serial).

    ## Returns
    `EliminationTrace`.

    ## Raises
    `ValueError`: If the full model does not converge under independence.

    ## Examples

    ```python
    trace = backward_eliminate(QebdSpec.for_panel(panel), panel)
    trace.dropped
    # ['y1:y3', 'y2:y4']
    ```
    """
    protect = set(protect or ())
    fit = _refit(spec, panel, None, max_iter, tol)
    if not fit.converged:
        raise ValueError(
            "the full model {!r} did not converge under independence".format(spec)
        )
    initial_qic = current_qic = fit.qic
    steps, skipped = [], []

    while True:
        candidates = [t for t in spec.interaction_terms if t not in protect]
        if not candidates:
            break
        init = fit.estimates if warm_start else None

        def evaluate(term, spec=spec, init=init):
            sub = spec.drop(term)
            try:
                return sub, _refit(sub, panel, init, max_iter, tol), None
            except QebdError as e:
                return sub, None, e.error

        results = concurrent_map(
            evaluate,
            candidates,
            thread_pool_executor=thread_pool_executor,
            max_workers=max_workers,
        )
        _, p_values = fit.wald()
        p_of = dict(zip(fit.names, p_values))

        scored = []
        for order, (term, (sub, sub_fit, error)) in enumerate(zip(candidates, results)):
            if error is None and (sub_fit.diverged or not sub_fit.converged):
                error = "refit diverged" if sub_fit.diverged else "refit did not converge"
            if error is not None:
                warnings.warn(
                    "Skipping elimination candidate {!r}: {}".format(term, error),
                    stacklevel=2,
                )
                skipped.append((len(steps) + 1, term, error))
                continue
            scored.append((sub_fit.qic, term, sub, sub_fit, order))
        if not scored:
            break

        best_qic = min(s[0] for s in scored)
        tied = [s for s in scored if s[0] - best_qic <= QIC_TIE]
        qic_after, term, sub, sub_fit, _ = max(
            tied, key=lambda s: (p_of.get(s[1], 0.0), -s[4])
        )
        if not qic_after < current_qic:
            break
        logger.info("dropped %s: QIC %.6f -> %.6f", term, current_qic, qic_after)
        steps.append(EliminationStep(term, current_qic, qic_after))
        spec, fit, current_qic = sub, sub_fit, qic_after

    return EliminationTrace(
        steps=tuple(steps),
        final_spec=spec,
        final_fit=fit,
        initial_qic=initial_qic,
        skipped=tuple(skipped),
    )
