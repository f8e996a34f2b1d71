"""
Reading and writing clustered binary panels as CSV.

Wide files hold one row per cluster. Every column without an ``@`` in its
header is a response; ``name@node`` holds covariate ``name`` at ``node``
and ``name@`` a cluster-level covariate shared by all nodes. An optional
``cluster`` column is ignored.

Long files hold one row per (cluster, node) with the columns ``cluster``,
``node`` and ``y``; any further column is a covariate.
"""

import re
from collections import namedtuple

import numpy as np
import pandas as pd

from pyqebd.core.errors import DimensionError, PanelFileError
from pyqebd.core.model import BinaryPanel

COVARIATE_SEP = "@"
CLUSTER_COLUMN = "cluster"
LONG_COLUMNS = ("cluster", "node", "y")
FORMATS = ("wide", "long")

PanelData = namedtuple("PanelData", ["panel", "covariates", "covariate_names"])


def _read_frame(path):
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.ParserError as e:
        found = re.search(r"line (\d+)", str(e))
        raise PanelFileError(
            "Malformed CSV: {}".format(str(e).strip()),
            line=int(found.group(1)) if found else None,
        ) from None
    except pd.errors.EmptyDataError:
        raise PanelFileError("{} is empty".format(path), line=1) from None
    except (OSError, UnicodeDecodeError) as e:
        raise PanelFileError("Cannot read {}: {}".format(path, e)) from None


def _numbers(frame, column, binary=False):
    values = pd.to_numeric(frame[column].str.strip(), errors="coerce")
    bad = values.isna()
    if binary:
        bad |= ~values.isin([0, 1])
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise PanelFileError(
            "{} {!r}".format(
                "non-binary response" if binary else "non-numeric value",
                frame[column].iloc[row],
            ),
            line=row + 2,
            column=column,
        )
    return values.to_numpy(dtype=float)


def _read_wide(frame):
    columns = [c for c in frame.columns if c != CLUSTER_COLUMN]
    responses = [c for c in columns if COVARIATE_SEP not in c]
    if not responses:
        raise PanelFileError("no response columns", line=1)
    y = np.column_stack([_numbers(frame, c, binary=True) for c in responses])
    n, m = y.shape

    by_name = {}
    for column in columns:
        if COVARIATE_SEP not in column:
            continue
        name, node = column.split(COVARIATE_SEP, 1)
        by_name.setdefault(name, {})[node] = column
    covariates = np.zeros((n, m, len(by_name)))
    for c, (name, cols) in enumerate(by_name.items()):
        if set(cols) == {""}:
            covariates[:, :, c] = _numbers(frame, cols[""])[:, None]
        elif set(cols) == set(responses):
            for j, node in enumerate(responses):
                covariates[:, j, c] = _numbers(frame, cols[node])
        else:
            raise PanelFileError(
                "covariate {!r} must be given once per cluster ({}@) or for every "
                "response column".format(name, name),
                line=1,
                column=next(iter(cols.values())),
            )
    panel = BinaryPanel(y.astype(np.int8), node_names=responses)
    return PanelData(panel, covariates, tuple(by_name))


def _read_long(frame):
    missing = [c for c in LONG_COLUMNS if c not in frame.columns]
    if missing:
        raise PanelFileError(
            "long format needs the columns {}".format(", ".join(LONG_COLUMNS)),
            line=1,
            column=missing[0],
        )
    y = _numbers(frame, "y", binary=True)
    extra = [c for c in frame.columns if c not in LONG_COLUMNS]
    values = {c: _numbers(frame, c) for c in extra}

    clusters = pd.unique(frame["cluster"])
    nodes = list(pd.unique(frame["node"]))
    n, m = len(clusters), len(nodes)
    cluster_pos = {k: i for i, k in enumerate(clusters)}
    node_pos = {v: j for j, v in enumerate(nodes)}
    out_y = np.full((n, m), -1, dtype=np.int8)
    covariates = np.zeros((n, m, len(extra)))
    for row, (k, v) in enumerate(zip(frame["cluster"], frame["node"])):
        i, j = cluster_pos[k], node_pos[v]
        if out_y[i, j] != -1:
            raise PanelFileError(
                "cluster {!r} has node {!r} twice".format(k, v), line=row + 2, column="node"
            )
        out_y[i, j] = y[row]
        for c, column in enumerate(extra):
            covariates[i, j, c] = values[column][row]
    incomplete = np.flatnonzero((out_y == -1).any(axis=1))
    if incomplete.size:
        k = clusters[incomplete[0]]
        row = int(np.flatnonzero((frame["cluster"] == k).to_numpy())[-1])
        raise PanelFileError(
            "cluster {!r} does not have exactly {} rows".format(k, m),
            line=row + 2,
            column="cluster",
        )
    panel = BinaryPanel(out_y, node_names=[str(v) for v in nodes])
    return PanelData(panel, covariates, tuple(extra))


def read_panel(path, format="wide"):
    """Read a panel CSV.

    ## Returns
    `PanelData` with the `BinaryPanel`, the covariates as an (n, m, c)
    array and their names.

    ## Raises
    `PanelFileError`: With the offending line and column.
    """
    if format not in FORMATS:
        raise ValueError("format must be 'wide' or 'long', got {!r}".format(format))
    frame = _read_frame(path)
    if format == "wide":
        return _read_wide(frame)
    return _read_long(frame)


def _covariate_array(panel, covariates, covariate_names):
    if covariates is None:
        return np.zeros((panel.n, panel.m, 0)), ()
    covariates = np.asarray(covariates, dtype=float)
    if covariates.ndim == 2:
        covariates = covariates[:, None, :].repeat(panel.m, axis=1)
    if covariates.shape[:2] != (panel.n, panel.m):
        raise DimensionError(
            "covariates have shape {}, panel is {}x{}".format(
                covariates.shape, panel.n, panel.m
            )
        )
    names = tuple(covariate_names or ("x{}".format(c + 1) for c in range(covariates.shape[2])))
    if len(names) != covariates.shape[2]:
        raise DimensionError("need one name per covariate")
    return covariates, names


def write_panel(path, panel, covariates=None, covariate_names=None, format="wide"):
    """Write a panel, and optional (n, m, c) or (n, c) covariates, as CSV.

    In the wide format a covariate that is constant within every cluster
    is written once as ``name@``.
    """
    if format not in FORMATS:
        raise ValueError("format must be 'wide' or 'long', got {!r}".format(format))
    covariates, names = _covariate_array(panel, covariates, covariate_names)
    if format == "long":
        frame = pd.DataFrame(
            {
                "cluster": np.repeat(np.arange(1, panel.n + 1), panel.m),
                "node": np.tile(panel.node_names, panel.n),
                "y": panel.y.ravel(),
            }
        )
        for c, name in enumerate(names):
            frame[name] = covariates[:, :, c].ravel()
    else:
        frame = pd.DataFrame(panel.y, columns=list(panel.node_names))
        for c, name in enumerate(names):
            values = covariates[:, :, c]
            if np.all(values == values[:, :1]):
                frame[name + COVARIATE_SEP] = values[:, 0]
            else:
                for j, node in enumerate(panel.node_names):
                    frame[name + COVARIATE_SEP + node] = values[:, j]
    frame.to_csv(path, index=False, encoding="utf-8", float_format="%.17g")


def design_covariates(data, intercept=True, time_start=None):
    """Covariate array of a regression family built from ingested panel data.

    Columns are the intercept, the file's covariates in order, and with
    ``time_start`` a time covariate ``time_start + j`` for node j.

    ## Returns
    ``(X, names)`` with X of shape (n, m, p).
    """
    panel = data.panel
    blocks, names = [], []
    if intercept:
        blocks.append(np.ones((panel.n, panel.m, 1)))
        names.append("intercept")
    if data.covariates.shape[2]:
        blocks.append(data.covariates)
        names.extend(data.covariate_names)
    if time_start is not None:
        times = float(time_start) + np.arange(panel.m)
        blocks.append(np.broadcast_to(times[None, :, None], (panel.n, panel.m, 1)))
        names.append("time")
    if not blocks:
        raise DimensionError("the model has no covariates")
    return np.concatenate(blocks, axis=2), tuple(names)


def read_characteristics(path, node_names):
    """Read per-node characteristics for interaction kernels.

    The file has a ``kernel`` column naming each kernel and one column per
    response node holding that node's characteristic.

    ## Returns
    ``(kernel_names, U)`` with U of shape (L, m).
    """
    frame = _read_frame(path)
    if "kernel" not in frame.columns:
        raise PanelFileError("characteristics file needs a 'kernel' column", line=1)
    missing = [node for node in node_names if node not in frame.columns]
    if missing:
        raise PanelFileError(
            "no characteristics for node {!r}".format(missing[0]), line=1, column=missing[0]
        )
    U = np.column_stack([_numbers(frame, node) for node in node_names])
    return tuple(frame["kernel"]), U


def write_characteristics(path, U, node_names, kernel_names=None):
    U = np.atleast_2d(np.asarray(U))
    frame = pd.DataFrame(U, columns=list(node_names))
    frame.insert(
        0, "kernel", list(kernel_names or ("gamma{}".format(i + 1) for i in range(len(U))))
    )
    frame.to_csv(path, index=False, encoding="utf-8")
