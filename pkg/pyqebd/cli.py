"""
Command-line interface: ``pyqebd {fit,simulate,mc,select,bench}``.

Flag defaults can be set through ``QEBD_``-prefixed environment variables,
for example ``QEBD_CORR=exc`` or ``QEBD_WORKERS=8``.
"""

import argparse
import hashlib
import json
import logging
import os
import sys

from pyqebd.core.api import ESTIMATOR_CHOICES, Api
from pyqebd.core.errors import QebdError
from pyqebd.core.exact import make_rng
from pyqebd.core.model import normalize_correlation_kind
from pyqebd.core.panel_io import (
    FORMATS,
    design_covariates,
    read_characteristics,
    read_panel,
    write_characteristics,
    write_panel,
)
from pyqebd.models.mapper import FAMILY_MAPPER
from pyqebd.sim.replication import ScenarioConfig, generate
from pyqebd.version import __version__

logger = logging.getLogger("pyqebd")

ENV_PREFIX = "QEBD_"
CORR_CHOICES = ("ind", "exc", "ar1")
FULL_REPLICATES = 500
EXIT_OK = 0
EXIT_ERROR = 2


def _env(name, default):
    return os.environ.get(ENV_PREFIX + name.upper(), default)


def _sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _options_hash(options, input_path=None):
    payload = dict(options)
    if input_path is not None:
        payload["input_sha256"] = _sha256_file(input_path)
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def _dump(payload):
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _coefficient_table(fit):
    """Estimate, standard error and p-value per parameter, three decimals."""
    frame = fit.summary()[["estimate", "se", "p_value"]]
    return frame.to_string(float_format=lambda v: "{:.3f}".format(v)) + "\n"


def _add_model_flags(parser):
    parser.add_argument("input", help="panel CSV")
    parser.add_argument(
        "--format", choices=FORMATS, default=_env("format", "wide"), help="panel layout"
    )
    parser.add_argument(
        "--model", choices=tuple(FAMILY_MAPPER), default=_env("model", "qebd")
    )
    parser.add_argument(
        "--no-interactions",
        action="store_true",
        help="main effects only",
    )
    parser.add_argument(
        "--kernels", help="CSV of per-node characteristics for qelr-linear"
    )
    parser.add_argument(
        "--kernel-fn", default=_env("kernel_fn", "equal"), help="kernel applied to them"
    )
    parser.add_argument(
        "--time-start",
        type=float,
        default=None,
        help="add a time covariate time_start + j for response column j",
    )


def _build_model(api, args):
    data = read_panel(args.input, format=args.format)
    interactions = not args.no_interactions
    if args.model == "qebd":
        return data.panel, api.model("qebd", data.panel, interactions=interactions)
    X, names = design_covariates(data, time_start=args.time_start)
    W = None
    kernel_names = None
    if args.model == "qelr-linear":
        if not args.kernels:
            raise ValueError("--kernels is required for the qelr-linear model")
        kernel_names, U = read_characteristics(args.kernels, data.panel.node_names)
        W = api.kernels_from_characteristics(U, args.kernel_fn)
    spec = api.model(
        args.model,
        data.panel,
        X=X,
        W=W,
        covariate_names=names,
        kernel_names=kernel_names,
        interactions=interactions,
    )
    return data.panel, spec


def _model_options(args):
    return {
        "model": args.model,
        "format": args.format,
        "interactions": not args.no_interactions,
        "kernel_fn": args.kernel_fn if args.model == "qelr-linear" else None,
        "kernels_sha256": _sha256_file(args.kernels) if args.kernels else None,
        "time_start": args.time_start,
    }


def _metadata(seed, config_hash):
    return {
        "tool": "pyqebd",
        "version": __version__,
        "seed": seed,
        "config_hash": config_hash,
    }


def cmd_fit(api, args):
    panel, spec = _build_model(api, args)
    corr = normalize_correlation_kind(args.corr)
    fit = api.fit(panel, spec, corr=corr, estimator=args.estimator)
    options = dict(_model_options(args), corr=corr, estimator=args.estimator)
    payload = {
        "metadata": _metadata(args.seed, _options_hash(options, args.input)),
        "model": spec.to_dict(),
        "fit": fit.to_dict(),
    }
    table = _coefficient_table(fit)
    if fit.diverged:
        table += "fit diverged\n"
    elif not fit.converged:
        table += "fit did not converge\n"
    if args.out:
        _write(args.out + ".json", _dump(payload))
        _write(args.out + ".txt", table)
    sys.stdout.write(table)
    return EXIT_OK


def cmd_select(api, args):
    panel, spec = _build_model(api, args)
    trace = api.select(panel, spec, protect=args.protect)
    options = dict(_model_options(args), protect=sorted(args.protect or []))
    payload = {
        "metadata": _metadata(args.seed, _options_hash(options, args.input)),
        "trace": trace.to_dict(),
    }
    table = trace.to_table() + "\n"
    if args.out:
        _write(args.out + ".json", _dump(payload))
        _write(args.out + ".txt", table)
    sys.stdout.write(table)
    return EXIT_OK


def _load_config(args):
    config = ScenarioConfig.from_file(args.config)
    changes = {}
    if args.replicates is not None:
        changes["replicates"] = args.replicates
    if getattr(args, "full", False):
        changes["replicates"] = FULL_REPLICATES
    if args.seed is not None:
        changes["seed"] = args.seed
    return config.replace(**changes) if changes else config


def cmd_simulate(api, args):
    """Write one panel CSV per replicate, named ``<name>_rNNNN.csv``."""
    config = _load_config(args)
    if config.replicates == 0:
        return EXIT_OK
    os.makedirs(args.out, exist_ok=True)
    stem = config.name or config.family
    files = []
    for r in range(config.replicates):
        panel, spec, U = generate(config, make_rng(config.seed, stream=r))
        path = os.path.join(args.out, "{}_r{:04d}.csv".format(stem, r))
        if config.family == "qebd":
            write_panel(path, panel, format=args.format)
        else:
            covariates = spec.covariates(panel)
            if config.family == "markov":
                # the time column is rebuilt on ingestion from --time-start
                write_panel(path, panel, covariates[:, :, 1:2], ("S",), format=args.format)
            else:
                write_panel(path, panel, covariates[:, :, 1:], ("x1", "x2"), format=args.format)
        files.append(os.path.basename(path))
        if U is not None:
            kernels_path = os.path.join(args.out, "{}_r{:04d}_kernels.csv".format(stem, r))
            write_characteristics(kernels_path, U, panel.node_names)
            files.append(os.path.basename(kernels_path))
    manifest = {
        "metadata": dict(
            _metadata(config.seed, config.config_hash), notes=config.notes()
        ),
        "scenario": config.to_dict(),
        "files": files,
    }
    _write(os.path.join(args.out, "{}_manifest.json".format(stem)), _dump(manifest))
    logger.info("wrote %d panels to %s", config.replicates, args.out)
    return EXIT_OK


def cmd_mc(api, args):
    config = _load_config(args)
    report = api.replicate(config)
    text = report.to_text()
    if args.out:
        report.to_csv(args.out + ".csv")
        _write(args.out + ".txt", text)
        _write(args.out + ".json", report.to_json() + "\n")
        report.timing_frame().to_csv(args.out + ".timing.csv", index=False)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_bench(api, args):
    result = api.bench(args.m, n=args.n, seed=args.seed or 0, repeats=args.repeats)
    text = result.to_text()
    if args.out:
        _write(args.out, text)
    sys.stdout.write(text)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pyqebd",
        description="Quadratic exponential binary models fitted by exact "
        "likelihood and pseudo-likelihood GEE.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "--log-level",
        default=_env("log_level", "WARNING"),
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
        type=str.upper,
    )
    parser.add_argument(
        "--workers", type=int, default=int(_env("workers", 1)), help="worker threads"
    )
    seed_default = _env("seed", None)
    parser.add_argument(
        "--seed", type=int, default=None if seed_default is None else int(seed_default)
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit a model to a panel")
    _add_model_flags(fit)
    fit.add_argument("--corr", choices=CORR_CHOICES, default=_env("corr", "ind"))
    fit.add_argument(
        "--estimator", choices=ESTIMATOR_CHOICES, default=_env("estimator", "gee")
    )
    fit.add_argument("--out", default=_env("out", None), help="output path prefix")
    fit.set_defaults(func=cmd_fit)

    select = sub.add_parser("select", help="QIC backward elimination of interactions")
    _add_model_flags(select)
    select.add_argument(
        "--protect", action="append", help="interaction that must stay (repeatable)"
    )
    select.add_argument("--out", default=_env("out", None), help="output path prefix")
    select.set_defaults(func=cmd_select)

    simulate = sub.add_parser("simulate", help="write simulated panels")
    simulate.add_argument("config", help="scenario JSON")
    simulate.add_argument("--replicates", type=int)
    simulate.add_argument("--format", choices=FORMATS, default=_env("format", "wide"))
    simulate.add_argument("--out", default=_env("out", "."), help="output directory")
    simulate.set_defaults(func=cmd_simulate)

    mc = sub.add_parser("mc", help="run a Monte Carlo scenario")
    mc.add_argument("config", help="scenario JSON")
    mc.add_argument("--replicates", type=int)
    mc.add_argument(
        "--full",
        action="store_true",
        help="run {} replicates".format(FULL_REPLICATES),
    )
    mc.add_argument("--out", default=_env("out", None), help="output path prefix")
    mc.set_defaults(func=cmd_mc)

    bench = sub.add_parser("bench", help="time MLE against GEE-IND")
    bench.add_argument("--m", type=int, nargs="+", default=[5, 10, 12])
    bench.add_argument("--n", type=int, default=300)
    bench.add_argument("--repeats", type=int, default=5)
    bench.add_argument("--out", default=_env("out", None), help="output file")
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=args.log_level, format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        api = Api(max_workers=args.workers)
        return args.func(api, args)
    except (QebdError, ValueError, KeyError, OSError) as e:
        message = e.error if isinstance(e, QebdError) else str(e)
        sys.stderr.write("pyqebd: error: {}\n".format(message))
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
