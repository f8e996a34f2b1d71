"""QELR with fifteen responses, common and linear interactions, at two sample sizes."""

import numpy as np
import pytest

from tests.util import load_scenario


@pytest.fixture(scope="module", params=["qelr_ci_m15", "qelr_linear_m15"])
def reports(request, qe):
    return {
        n: qe.replicate(load_scenario(request.param, n=n, replicates=100))
        for n in (100, 300)
    }


def _gamma_names(report):
    return [n for n in report.config.truth_psi().names if n.startswith("gamma")]


def test_independence_bias_shrinks_with_n(reports):
    def mean_abs_bias(report):
        names = report.config.truth_psi().names
        return np.mean([abs(report.metric(p, "gee-ind", "bias")) for p in names])

    assert mean_abs_bias(reports[300]) < mean_abs_bias(reports[100])


def test_interaction_standard_errors(reports):
    for report in reports.values():
        for name in _gamma_names(report):
            assert report.metric(name, "gglm", "re") < 0.85
            assert 0.85 <= report.metric(name, "gee-ind", "re") <= 1.15


def test_exchangeable_diverges_often(reports):
    report = reports[100]
    if report.config.family != "qelr-ci":
        pytest.skip("divergence rate is checked for the common interaction")
    assert report.metric("gamma", "gee-exc", "divergence_rate") > 0.30
