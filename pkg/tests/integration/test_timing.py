"""Wall-clock cost of exact MLE relative to the independence GEE."""

import pytest

from pyqebd.sim.bench import BENCH_M


@pytest.fixture(scope="module")
def bench(qe):
    return qe.bench(BENCH_M, n=300, seed=0, repeats=3)


def test_mle_slower_at_small_m(bench):
    assert bench.ratio(5) > 5


def test_ratio_grows_with_m(bench):
    ratios = [bench.ratio(m) for m in BENCH_M]
    assert ratios == sorted(ratios)
    assert bench.ratio(12) > 50
