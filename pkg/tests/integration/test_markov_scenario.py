"""First-order transition model with a binary covariate, 200 replicates."""

import pytest

from pyqebd.core.errors import QebdError
from tests.util import load_scenario

PARAMETERS = ("beta0", "beta1", "beta2", "gamma1")


def test_no_failed_replicates(markov_report):
    for row in markov_report.rows:
        assert row["divergence_rate"] == 0.0


@pytest.mark.parametrize("estimator", ["mle", "gee-ind"])
@pytest.mark.parametrize("parameter", PARAMETERS)
def test_consistent_estimators_unbiased(markov_report, estimator, parameter):
    assert abs(markov_report.metric(parameter, estimator, "bias")) < 0.04


def test_ar1_biases_lag_effect(markov_report):
    assert -0.20 <= markov_report.metric("gamma1", "gee-ar1", "bias") <= -0.05


def test_exchangeable_loses_efficiency(markov_report):
    assert 0.40 <= markov_report.metric("gamma1", "gee-exc", "re") <= 0.70


@pytest.mark.parametrize("parameter", PARAMETERS)
def test_independence_matches_likelihood_se(markov_report, parameter):
    assert 0.90 <= markov_report.metric(parameter, "gee-ind", "re") <= 1.10


def test_text_report(markov_report):
    text = markov_report.to_text()
    assert text.startswith("markov_smoking")
    assert "gee-ar1" in text


def test_config_errors_are_qebd_errors():
    with pytest.raises(QebdError):
        load_scenario("markov_smoking", estimators=("mle", "bayes"))
