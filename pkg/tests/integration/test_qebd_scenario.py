"""QEBD with five responses, exact MLE against the pseudo-likelihood estimators."""

import pytest

from pyqebd.models.qebd import QebdSpec

NAMES = QebdSpec(5).names
ZERO_THETA = ("y1:y4", "y1:y5", "y2:y4", "y2:y5", "y3:y4", "y3:y5")


@pytest.mark.parametrize("parameter", NAMES)
def test_pooled_glm_understates_se(qebd_report, parameter):
    assert qebd_report.metric(parameter, "gglm", "re") < 0.90


@pytest.mark.parametrize("estimator", ["mle", "gee-ind"])
@pytest.mark.parametrize("parameter", NAMES)
def test_consistent_estimators(qebd_report, estimator, parameter):
    assert 0.85 <= qebd_report.metric(parameter, estimator, "re") <= 1.15
    assert abs(qebd_report.metric(parameter, estimator, "bias")) < 0.06


@pytest.mark.parametrize("parameter", ZERO_THETA)
def test_size_of_wald_test(qebd_report, parameter):
    for estimator in ("mle", "gee-ind"):
        assert 0.02 <= qebd_report.metric(parameter, estimator, "pw") <= 0.10
    assert qebd_report.metric(parameter, "gglm", "pw") > 0.10


def test_pooled_glm_and_independence_share_estimates(qebd_report):
    for parameter in NAMES:
        assert qebd_report.metric(parameter, "gglm", "bias") == pytest.approx(
            qebd_report.metric(parameter, "gee-ind", "bias"), abs=1e-6
        )
