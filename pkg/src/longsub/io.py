"""Long-format CSV ingestion and plot-ready result export."""

from __future__ import annotations

import csv
import logging
import math
from collections import OrderedDict
from pathlib import Path
from typing import Optional

import numpy as np

from .bspline import design_matrix, grid
from .config import DataConfig
from .core import FittedModel, LongitudinalDataset, SubjectRecord
from .errors import EmptyDataset, MissingColumn, NonConstantBaseline, NonNumericCell

logger = logging.getLogger(__name__)

TRANSFORMS = ("identity", "log", "rescale")


def fmt(value) -> str:
    """17 significant digits: enough for an exact float round trip."""
    return format(float(value), ".17g")


def _resolve_columns(header, data: DataConfig):
    if data.id not in header:
        raise MissingColumn(f"missing subject id column {data.id!r}")
    if data.y not in header:
        raise MissingColumn(f"missing response column {data.y!r}")
    cols = {}
    for role in ("x", "z", "s"):
        names = list(getattr(data, role))
        if not names:
            names = [h for h in header if h.startswith(role + "_")]
        for name in names:
            if name not in header:
                raise MissingColumn(f"missing {role} column {name!r}")
        cols[role] = names
    if not cols["x"]:
        raise MissingColumn("no smooth covariate columns (declare data.x or use x_ prefixes)")
    for name in data.transform:
        if name not in header:
            raise MissingColumn(f"transform names unknown column {name!r}")
    return cols


def _apply_transform(name, kind, values):
    if kind == "identity":
        return values
    if kind == "log":
        if np.any(values <= 0):
            raise ValueError(f"log transform of column {name!r} needs positive values")
        return np.log(values)
    if kind == "rescale":
        lo, hi = float(values.min()), float(values.max())
        if hi <= lo:
            raise ValueError(f"cannot rescale constant column {name!r}")
        return (values - lo) / (hi - lo)
    raise ValueError(f"unknown transform {kind!r} for column {name!r}; use one of {TRANSFORMS}")


def read_long_csv(path, data: Optional[DataConfig] = None) -> LongitudinalDataset:
    """Read a long-format panel, one row per visit.

    Rows are grouped by subject in file order, which also fixes the visit
    order. Subjects with fewer than ``data.min_visits`` rows are dropped when
    the exclusion policy is ``exclude``.
    """
    data = data or DataConfig()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MissingColumn(f"{path}: empty file, no header row") from None
        rows = [(lineno, row) for lineno, row in enumerate(reader, start=2) if any(c.strip() for c in row)]
    cols = _resolve_columns(header, data)
    index = {h: k for k, h in enumerate(header)}
    numeric = [data.y] + cols["x"] + cols["z"] + cols["s"]

    values = {name: np.empty(len(rows)) for name in numeric}
    ids = []
    for pos, (lineno, row) in enumerate(rows):
        if len(row) < len(header):
            row = row + [""] * (len(header) - len(row))
        ids.append(row[index[data.id]].strip())
        for name in numeric:
            cell = row[index[name]].strip()
            try:
                v = float(cell)
            except ValueError:
                raise NonNumericCell(lineno, name, cell) from None
            if not math.isfinite(v):
                raise NonNumericCell(lineno, name, cell)
            values[name][pos] = v
    if not rows:
        raise EmptyDataset(f"{path}: no data rows")
    for name, kind in sorted(data.transform.items()):
        if name in values:
            values[name] = _apply_transform(name, kind, values[name])

    groups = OrderedDict()
    for pos, sid in enumerate(ids):
        groups.setdefault(sid, []).append(pos)

    subjects = []
    dropped = []
    for sid, idx in groups.items():
        idx = np.asarray(idx)
        s = np.array([values[c][idx[0]] for c in cols["s"]])
        for c in cols["s"]:
            if np.any(values[c][idx] != values[c][idx[0]]):
                raise NonConstantBaseline(sid, c)
        if data.exclusion == "exclude" and len(idx) < data.min_visits:
            dropped.append(sid)
            continue
        x = np.column_stack([values[c][idx] for c in cols["x"]])
        z = (np.column_stack([values[c][idx] for c in cols["z"]]) if cols["z"]
             else np.zeros((len(idx), 0)))
        subjects.append(SubjectRecord(sid, values[data.y][idx], x, z, s))
    if dropped:
        logger.warning("dropped %d subject(s) with fewer than %d visits: %s",
                       len(dropped), data.min_visits, dropped)
    if not subjects:
        raise EmptyDataset(f"{path}: no subject has enough visits")
    return LongitudinalDataset(tuple(subjects), len(cols["x"]), len(cols["z"]), len(cols["s"]))


def write_long_csv(dataset: LongitudinalDataset, path) -> None:
    header = (["subject_id", "y"] + [f"x_{j + 1}" for j in range(dataset.p)]
              + [f"z_{k + 1}" for k in range(dataset.q)] + [f"s_{k + 1}" for k in range(dataset.r)])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for sub in dataset.subjects:
            base = [fmt(v) for v in sub.s]
            for t in range(sub.n_obs):
                w.writerow([sub.id, fmt(sub.y[t])] + [fmt(v) for v in sub.x[t]]
                           + [fmt(v) for v in sub.z[t]] + base)


def write_memberships(path, subject_ids, labels) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject_id", "covariate", "group"])
        for j, lab in enumerate(labels):
            for sid, g in zip(subject_ids, lab):
                w.writerow([sid, j + 1, int(g)])


def read_memberships(path) -> dict:
    """``{covariate: {subject_id: group}}`` from a memberships or truth CSV."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for col in ("subject_id", "covariate", "group"):
            if col not in (reader.fieldnames or []):
                raise MissingColumn(f"{path}: missing column {col!r}")
        for row in reader:
            out.setdefault(int(row["covariate"]), {})[row["subject_id"].strip()] = int(row["group"])
    return out


def write_panel(panel, outdir) -> None:
    """Simulated panel as ``data.csv`` plus its true memberships in ``truth.csv``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_long_csv(panel.dataset, outdir / "data.csv")
    write_memberships(outdir / "truth.csv", panel.dataset.ids, panel.truth.labels)


def write_results(model: FittedModel, bases, outdir, grid_size: int = 101) -> None:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_memberships(outdir / "memberships.csv", model.subject_ids, model.partition.labels)

    with open(outdir / "coefficients.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["covariate", "group", "basis_index", "gamma"])
        for j, g in enumerate(model.gamma):
            for k in range(g.shape[0]):
                for b in range(g.shape[1]):
                    w.writerow([j + 1, k + 1, b + 1, fmt(g[k, b])])

    with open(outdir / "beta.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["term", "estimate"])
        for k, v in enumerate(model.beta):
            w.writerow(["intercept" if k == 0 else f"s_{k}", fmt(v)])

    with open(outdir / "bic_trace.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["covariate", "m", "loglik", "k", "n", "bic", "feasible"])
        for j in sorted(model.bic_trace):
            for rec in model.bic_trace[j]:
                w.writerow([j + 1, rec.candidate_m, fmt(rec.loglik), rec.k_params, rec.n_obs,
                            fmt(rec.bic), int(rec.feasible)])

    with open(outdir / "fitted_grids.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["covariate", "group", "x", "fhat"])
        for j, (g, basis) in enumerate(zip(model.gamma, bases)):
            xs = grid(basis, grid_size)
            curves = design_matrix(basis, xs) @ g.T
            for k in range(g.shape[0]):
                for x, f in zip(xs, curves[:, k]):
                    w.writerow([j + 1, k + 1, fmt(x), fmt(f)])
