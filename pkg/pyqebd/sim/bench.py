"""
Wall-clock comparison of exact MLE against the independence GEE on QEBD data.
"""

import logging
import time
from dataclasses import dataclass

import numpy as np
import pandas as pd

from pyqebd.core.errors import DimensionError
from pyqebd.core.exact import check_enumeration_cap, exact_sampler, make_rng, mle_fit
from pyqebd.core.gee import fit_gee
from pyqebd.core.model import INDEPENDENCE, QebdParams, pair_indices
from pyqebd.models.qebd import QebdSpec

logger = logging.getLogger(__name__)

BENCH_M = (5, 10, 12)


def bench_params(m):
    """β evenly spaced on [-1.5, 1.5] and θ = -0.4 between neighbouring nodes."""
    beta = np.linspace(-1.5, 1.5, m)
    rows, cols = pair_indices(m)
    theta = np.where(cols - rows == 1, -0.4, 0.0)
    return QebdParams(beta=beta, theta=theta)


def _median_seconds(func, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        func()
        times.append(time.perf_counter() - start)
    return float(np.median(times))


@dataclass(frozen=True)
class BenchResult:
    n: int
    seed: int
    repeats: int
    rows: tuple

    def to_frame(self):
        return pd.DataFrame(
            list(self.rows), columns=["m", "mle_seconds", "gee_ind_seconds", "ratio"]
        )

    def ratio(self, m):
        for row in self.rows:
            if row[0] == m:
                return row[3]
        raise KeyError(m)

    def to_text(self):
        header = "n={}, seed={}, median of {} fits".format(self.n, self.seed, self.repeats)
        body = self.to_frame().to_string(
            index=False, float_format=lambda v: "{:.4f}".format(v)
        )
        return "{}\n{}\n".format(header, body)


def bench_timing(m_list=BENCH_M, n=300, seed=0, repeats=5):
    """Median seconds per fit of MLE and GEE-IND for each m.

    One QEBD panel is drawn exactly per m; only the fit calls are timed.

    ## Returns
    `BenchResult` with one ``(m, mle_seconds, gee_ind_seconds, ratio)`` row
    per m, where ratio is MLE over GEE-IND.

    ## Raises
    `EnumerationLimitError`: If an m exceeds the enumeration cap.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    rows = []
    for m in m_list:
        if m < 2:
            raise DimensionError("bench needs m >= 2, got {}".format(m))
        check_enumeration_cap(m)
        panel = exact_sampler(bench_params(m), n, make_rng(seed, stream=m))
        design = QebdSpec(m).expand(panel)
        design.node_support  # built with the design; only the fits are timed
        mle = _median_seconds(lambda: mle_fit(panel), repeats)
        gee = _median_seconds(lambda: fit_gee(design, INDEPENDENCE), repeats)
        logger.info("m=%d: mle %.4fs, gee-ind %.4fs", m, mle, gee)
        rows.append((int(m), mle, gee, mle / gee))
    return BenchResult(n=n, seed=seed, repeats=repeats, rows=tuple(rows))
