"""
Monte Carlo replication of the simulation scenarios.

A `ScenarioConfig` names a family, its true parameters and the estimators
to compare. `run_replications` generates every replicate from its own
counter-based random stream, fits each estimator, and reduces the results
in replicate order into a `ReplicationReport` of Bias, S.E., Emp. S.D.,
R.E., PW and divergence rate per parameter and estimator.
"""

import dataclasses
import hashlib
import json
import logging
import time
from collections import namedtuple
from dataclasses import dataclass

import numpy as np
import pandas as pd
from packaging.specifiers import InvalidSpecifier, SpecifierSet
from scipy import stats

from pyqebd.core.errors import ConfigError, QebdError
from pyqebd.core.exact import (
    ENUMERATION_CAP,
    GIBBS_BURN_IN,
    GIBBS_THIN,
    RNG_ALGORITHM,
    make_rng,
    mle_fit,
)
from pyqebd.core.gee import fit_gee, fit_gglm
from pyqebd.core.model import (
    AR1,
    EXCHANGEABLE,
    INDEPENDENCE,
    PsiVector,
    QebdParams,
    n_pairs,
)
from pyqebd.core.util import concurrent_map
from pyqebd.models.markov import MarkovSpec
from pyqebd.models.qebd import QebdSpec
from pyqebd.models.qelr import QelrCiSpec, QelrLinearSpec
from pyqebd.sim.generators import (
    MARKOV_TIMES,
    QELR_BURN_IN,
    QELR_LEVELS,
    QELR_THIN,
    gen_markov,
    gen_qebd,
    gen_qelr,
)
from pyqebd.version import __version__

logger = logging.getLogger(__name__)

FAMILIES = ("qebd", "markov", "qelr-ci", "qelr-linear")
ESTIMATORS = ("mle", "gglm", "gee-ind", "gee-exc", "gee-ar1")
DENOMINATORS = ("mle-se", "emp-sd")
GEE_KINDS = {"gee-ind": INDEPENDENCE, "gee-exc": EXCHANGEABLE, "gee-ar1": AR1}
COVARIATE_NAMES = ("beta0", "beta1", "beta2")
QELR_M = 15

Dataset = namedtuple("Dataset", ["panel", "spec", "U"])


@dataclass(frozen=True)
class ScenarioConfig:
    """A simulation scenario, usually read from a JSON file.

    ## Parameters

    * **family** (str): ``qebd``, ``markov``, ``qelr-ci`` or ``qelr-linear``.
    * **truth** (dict): ``{"beta": [...], "theta": [...]}`` for ``qebd``,
      ``{"beta": [...], "gamma": [...]}`` otherwise.
    * **n** (int): Clusters per replicate.
    * **m** (int, optional): Responses per cluster; implied by the truth
      for ``qebd`` and by ``times`` for ``markov``. Default 15 for QELR.
    * **replicates** (int, optional): Default 200.
    * **seed** (int, optional): Master seed, default 0.
    * **estimators** (sequence of str, optional): Subset of
      ``mle, gglm, gee-ind, gee-exc, gee-ar1``.
    * **re_denominator** (str, optional): ``emp-sd`` (default) or ``mle-se``.
    * **reference_estimator** (str, optional): Estimator supplying the R.E.
      denominator; ``mle`` when it is run, ``gglm`` otherwise.
    * **alpha** (float, optional): Wald test level for PW, default 0.05.
    * **requires** (str, optional): PEP 440 specifier the running version
      must satisfy.

    ## Raises
    `ConfigError`: For unknown keys or invalid values.
    """

    family: str
    truth: dict
    n: int
    m: int = None
    replicates: int = 200
    seed: int = 0
    estimators: tuple = ("gglm", "gee-ind")
    re_denominator: str = "emp-sd"
    reference_estimator: str = None
    alpha: float = 0.05
    name: str = None
    generator: str = "exact"
    burn_in: int = None
    thin: int = None
    levels: int = QELR_LEVELS
    times: tuple = MARKOV_TIMES
    workers: int = 1
    requires: str = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(
                "family must be one of {}, got {!r}".format(", ".join(FAMILIES), self.family)
            )
        truth = {
            key: tuple(float(v) for v in np.atleast_1d(values))
            for key, values in dict(self.truth).items()
        }
        object.__setattr__(self, "truth", truth)
        object.__setattr__(self, "estimators", tuple(self.estimators))
        object.__setattr__(self, "times", tuple(int(t) for t in self.times))
        if self.m is None:
            object.__setattr__(self, "m", self._implied_m())
        self._validate()

    def _implied_m(self):
        if self.family == "qebd":
            return len(self.truth.get("beta", ()))
        if self.family == "markov":
            return len(self.times)
        return QELR_M

    def _validate(self):
        if self.requires is not None:
            try:
                spec = SpecifierSet(self.requires)
            except InvalidSpecifier:
                raise ConfigError("invalid requires specifier {!r}".format(self.requires))
            if not spec.contains(__version__, prereleases=True):
                raise ConfigError(
                    "scenario requires pyqebd{}, running {}".format(self.requires, __version__)
                )
        if int(self.n) < 1:
            raise ConfigError("n must be >= 1, got {!r}".format(self.n))
        if int(self.replicates) < 0:
            raise ConfigError("replicates must be >= 0, got {!r}".format(self.replicates))
        if int(self.workers) < 1:
            raise ConfigError("workers must be >= 1, got {!r}".format(self.workers))
        if not self.estimators:
            raise ConfigError("estimators must not be empty")
        unknown = [e for e in self.estimators if e not in ESTIMATORS]
        if unknown:
            raise ConfigError("unknown estimators: {}".format(", ".join(unknown)))
        if "mle" in self.estimators:
            if self.family not in ("qebd", "markov"):
                raise ConfigError("mle is only available for the qebd and markov families")
            if self.family == "qebd" and self.m > ENUMERATION_CAP:
                raise ConfigError(
                    "mle needs m <= {}, got m={}".format(ENUMERATION_CAP, self.m)
                )
        if self.re_denominator not in DENOMINATORS:
            raise ConfigError(
                "re_denominator must be one of {}".format(", ".join(DENOMINATORS))
            )
        if self.reference not in self.estimators:
            raise ConfigError(
                "reference_estimator {!r} is not among the estimators".format(self.reference)
            )
        if not 0.0 < float(self.alpha) < 1.0:
            raise ConfigError("alpha must lie in (0, 1), got {!r}".format(self.alpha))
        if self.generator not in ("exact", "gibbs"):
            raise ConfigError("generator must be 'exact' or 'gibbs'")
        self._validate_truth()

    def _validate_truth(self):
        expected = {"beta"} | ({"theta"} if self.family == "qebd" else {"gamma"})
        if set(self.truth) != expected:
            raise ConfigError(
                "truth for {} needs exactly the keys {}".format(
                    self.family, ", ".join(sorted(expected))
                ),
                unknown_keys=sorted(set(self.truth) - expected),
            )
        beta, other = self.truth["beta"], self.truth[(expected - {"beta"}).pop()]
        if self.family == "qebd":
            ok = len(beta) == self.m and len(other) == n_pairs(self.m) and self.m >= 2
        elif self.family in ("markov", "qelr-ci"):
            ok = len(beta) == 3 and len(other) == 1
        else:
            ok = len(beta) == 3 and len(other) >= 1
        if not ok:
            raise ConfigError("truth has the wrong dimensions for {}".format(self.family))
        if self.family == "markov" and self.m != len(self.times):
            raise ConfigError("m must equal the number of times for markov")

    @property
    def reference(self):
        if self.reference_estimator is not None:
            return self.reference_estimator
        return "mle" if "mle" in self.estimators else "gglm"

    @property
    def L(self):
        return len(self.truth.get("gamma", ()))

    @classmethod
    def from_dict(cls, data):
        fields = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - fields)
        if unknown:
            raise ConfigError(
                "Unknown scenario keys: {}".format(", ".join(unknown)), unknown_keys=unknown
            )
        missing = sorted(k for k in ("family", "truth", "n") if k not in data)
        if missing:
            raise ConfigError("Missing scenario keys: {}".format(", ".join(missing)))
        try:
            return cls(**data)
        except (TypeError, ValueError) as e:
            raise ConfigError("Invalid scenario: {}".format(e)) from None

    @classmethod
    def from_file(cls, path):
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError("{} is not valid JSON: {}".format(path, e)) from None
        if not isinstance(data, dict):
            raise ConfigError("{} must hold a JSON object".format(path))
        return cls.from_dict(data)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        out = dataclasses.asdict(self)
        out["truth"] = {k: list(v) for k, v in self.truth.items()}
        out["estimators"] = list(self.estimators)
        out["times"] = list(self.times)
        return out

    @property
    def config_hash(self):
        """SHA-256 of the canonical JSON of everything that shapes the results."""
        data = self.to_dict()
        data.pop("workers")
        canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def truth_psi(self):
        """True ψ in the parameter layout of the fitted designs."""
        beta = self.truth["beta"]
        if self.family == "qebd":
            params = QebdParams(beta=beta, theta=self.truth["theta"])
            return QebdSpec(self.m).psi_from_params(params)
        gamma = self.truth["gamma"]
        if self.family == "markov":
            names = COVARIATE_NAMES + ("gamma1",)
        elif self.family == "qelr-ci":
            names = COVARIATE_NAMES + ("gamma",)
        else:
            names = COVARIATE_NAMES + tuple("gamma{}".format(i + 1) for i in range(len(gamma)))
        return PsiVector(beta=beta, gamma=gamma, names=names)

    def notes(self):
        if self.family == "markov":
            return [
                "S drawn Bernoulli(1/2) per cluster and redrawn every replicate",
                "the mle estimator is the pooled transition-model likelihood",
            ]
        if self.family.startswith("qelr"):
            return [
                "x1, x2 drawn N(0, 1) per (cluster, node) and redrawn every replicate",
                "characteristics u drawn uniform on 1..{} per dataset".format(self.levels),
                "responses drawn by Gibbs sampling, burn_in={}, thin={}".format(
                    self.burn_in or QELR_BURN_IN, self.thin or QELR_THIN
                ),
            ]
        if self.generator == "gibbs":
            return [
                "responses drawn by Gibbs sampling, burn_in={}, thin={}".format(
                    self.burn_in or GIBBS_BURN_IN, self.thin or GIBBS_THIN
                )
            ]
        return ["responses drawn exactly by inverse CDF"]


def generate(config, rng):
    """Simulate one dataset.

    ## Returns
    `Dataset` with the panel, the model specification to fit and, for the
    linear QELR family, the per-node characteristics behind the kernels.
    """
    if config.family == "qebd":
        params = QebdParams(beta=config.truth["beta"], theta=config.truth["theta"])
        panel = gen_qebd(
            params,
            config.n,
            rng,
            method=config.generator,
            burn_in=config.burn_in or GIBBS_BURN_IN,
            thin=config.thin or GIBBS_THIN,
        )
        return Dataset(panel, QebdSpec(config.m), None)
    if config.family == "markov":
        truth = config.truth["beta"] + config.truth["gamma"]
        data = gen_markov(truth, config.n, rng, times=config.times)
        return Dataset(data.panel, MarkovSpec(data.X, covariate_names=COVARIATE_NAMES), None)
    family = config.family.replace("qelr-", "")
    data = gen_qelr(
        (config.truth["beta"], config.truth["gamma"]),
        config.n,
        config.m,
        config.L,
        rng,
        family=family,
        burn_in=config.burn_in or QELR_BURN_IN,
        thin=config.thin or QELR_THIN,
        levels=config.levels,
    )
    if family == "ci":
        return Dataset(data.panel, QelrCiSpec(data.X, COVARIATE_NAMES), None)
    return Dataset(data.panel, QelrLinearSpec(data.X, data.W, COVARIATE_NAMES), data.U)


def _fit(estimator, spec, panel, max_iter, tol):
    """Returns (estimates, standard errors, failed)."""
    if estimator == "mle" and isinstance(spec, QebdSpec):
        fit = mle_fit(panel, max_iter=max_iter, tol=tol)
        return fit.estimates.vector, fit.standard_errors, not fit.converged
    design = spec.expand(panel)
    if estimator in ("mle", "gglm"):
        fit = fit_gglm(design, max_iter=max_iter, tol=tol)
    else:
        fit = fit_gee(design, GEE_KINDS[estimator], max_iter=max_iter, tol=tol)
    return fit.estimates.vector, fit.standard_errors, not fit.converged


def run_replicate(config, r, max_iter=100, tol=1e-8):
    """Generate replicate ``r`` and fit every estimator on it.

    Returns a dict estimator → ``(estimates, se, failed, seconds)``.
    """
    rng = make_rng(config.seed, stream=r)
    panel, spec, _ = generate(config, rng)
    d = len(config.truth_psi())
    out = {}
    for estimator in config.estimators:
        start = time.perf_counter()
        try:
            values, se, failed = _fit(estimator, spec, panel, max_iter, tol)
        except QebdError as e:
            logger.info("replicate %d %s failed: %s", r, estimator, e.error)
            values, se, failed = np.full(d, np.nan), np.full(d, np.nan), True
        out[estimator] = (values, se, failed, time.perf_counter() - start)
    logger.debug("replicate %d finished", r)
    return out


def _finite_or_none(value):
    return None if value is None or not np.isfinite(value) else float(value)


@dataclass(frozen=True)
class ReplicationReport:
    """Aggregated Monte Carlo metrics.

    ``rows`` holds one record per (parameter, estimator). ``timing`` maps
    each estimator to its mean wall-clock seconds per fit and is kept out
    of the deterministic outputs.
    """

    config: ScenarioConfig
    rows: tuple
    timing: dict
    metadata: dict

    def to_frame(self):
        return pd.DataFrame(list(self.rows))

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False, float_format="%.6f")

    def to_dict(self):
        return {"metadata": self.metadata, "rows": list(self.rows)}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def timing_frame(self):
        return pd.DataFrame(
            [{"estimator": k, "seconds": v} for k, v in self.timing.items()]
        )

    def metric(self, parameter, estimator, name):
        for row in self.rows:
            if row["parameter"] == parameter and row["estimator"] == estimator:
                return row[name]
        raise KeyError((parameter, estimator))

    def to_text(self):
        """Aligned table with one block of Bias, S.E./R.E. and PW per estimator."""
        frame = self.to_frame()
        if frame.empty:
            return "no replicates"
        frame["estimator"] = pd.Categorical(
            frame["estimator"], categories=list(self.config.estimators), ordered=True
        )
        wide = frame.pivot(
            index="parameter", columns="estimator", values=["bias", "se", "re", "pw"]
        )
        wide = wide.swaplevel(0, 1, axis=1).sort_index(axis=1, level=0, sort_remaining=False)
        order = list(dict.fromkeys(frame["parameter"]))
        wide = wide.reindex(order)
        truth = frame.drop_duplicates("parameter").set_index("parameter")["truth"]
        wide.insert(0, ("", "truth"), truth.reindex(order))
        header = "{} (n={}, m={}, replicates={}, seed={})".format(
            self.config.name or self.config.family,
            self.config.n,
            self.config.m,
            self.config.replicates,
            self.config.seed,
        )
        rates = ", ".join(
            "{} {:.3f}".format(e, frame.loc[frame["estimator"] == e, "divergence_rate"].iloc[0])
            for e in self.config.estimators
        )
        body = wide.to_string(
            float_format=lambda v: "{:.3f}".format(v), na_rep="-"
        )
        return "{}\n{}\ndivergence rate: {}\n".format(header, body, rates)


def aggregate(config, results):
    """Reduce per-replicate results, in replicate order, into report rows."""
    truth = config.truth_psi()
    crit = stats.norm.ppf(1.0 - config.alpha / 2.0)
    per_est = {}
    for estimator in config.estimators:
        values = np.array([res[estimator][0] for res in results], dtype=float)
        se = np.array([res[estimator][1] for res in results], dtype=float)
        failed = np.array([res[estimator][2] for res in results], dtype=bool)
        used = ~failed & np.all(np.isfinite(values), axis=1) & np.all(np.isfinite(se), axis=1)
        per_est[estimator] = (values[used], se[used], used.sum())

    summary = {}
    for estimator, (values, se, used) in per_est.items():
        if used:
            mean_se = se.mean(axis=0)
            bias = values.mean(axis=0) - truth.vector
            with np.errstate(divide="ignore", invalid="ignore"):
                pw = np.mean(np.abs(values / se) > crit, axis=0)
        else:
            mean_se = bias = pw = np.full(len(truth), np.nan)
        emp_sd = values.std(axis=0, ddof=1) if used >= 2 else np.full(len(truth), np.nan)
        summary[estimator] = (bias, mean_se, emp_sd, pw, used)

    ref = summary[config.reference]
    denominator = ref[2] if config.re_denominator == "emp-sd" else ref[1]
    rows = []
    n_reps = len(results)
    for i, name in enumerate(truth.names):
        for estimator in config.estimators:
            bias, mean_se, emp_sd, pw, used = summary[estimator]
            with np.errstate(divide="ignore", invalid="ignore"):
                re = mean_se[i] / denominator[i]
            rows.append(
                {
                    "parameter": name,
                    "truth": float(truth.vector[i]),
                    "estimator": estimator,
                    "bias": _finite_or_none(bias[i]),
                    "se": _finite_or_none(mean_se[i]),
                    "emp_sd": _finite_or_none(emp_sd[i]),
                    "re": _finite_or_none(re),
                    "pw": _finite_or_none(pw[i]),
                    "divergence_rate": float(n_reps - used) / n_reps,
                    "used": int(used),
                    "replicates": n_reps,
                }
            )
    return tuple(rows)


def run_replications(
    config, thread_pool_executor=None, max_workers=None, max_iter=100, tol=1e-8
):
    """Run every replicate of a scenario and aggregate the metrics.

    Replicates run concurrently on up to ``max_workers`` threads (default
    ``config.workers``). Each draws from the substream keyed by its index,
    and aggregation follows replicate order, so the report does not depend
    on the worker count.

    ## Raises
    `ConfigError`: If ``config.replicates < 1``.

    ## Examples

    ```python
    config = ScenarioConfig.from_file("pyqebd/data/scenarios/markov_smoking.json")
    print(run_replications(config.replace(replicates=20)).to_text())
    ```
    """
    if config.replicates < 1:
        raise ConfigError("run_replications needs replicates >= 1")
    results = concurrent_map(
        lambda r: run_replicate(config, r, max_iter=max_iter, tol=tol),
        range(config.replicates),
        thread_pool_executor=thread_pool_executor,
        max_workers=max_workers or config.workers,
    )
    timing = {
        e: float(np.mean([res[e][3] for res in results])) for e in config.estimators
    }
    metadata = {
        "tool": "pyqebd",
        "version": __version__,
        "seed": config.seed,
        "config_hash": config.config_hash,
        "rng": RNG_ALGORITHM,
        "scenario": config.to_dict(),
        "notes": config.notes(),
    }
    logger.info("finished %d replicates of %s", config.replicates, config.name or config.family)
    return ReplicationReport(
        config=config, rows=aggregate(config, results), timing=timing, metadata=metadata
    )
