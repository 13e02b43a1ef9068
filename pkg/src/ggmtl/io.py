"""CSV datasets, experiment splits and JSON persistence of fits."""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict

import numpy as np

from .config import HyperParams, MultiTaskCsv
from .driver import FitResult, TraceRecord
from .graph import graph_from_dict, graph_to_dict
from .inner import TaskData

FIT_SCHEMA_VERSION = 1


class DataError(ValueError):
    """Malformed dataset or persisted file."""


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file (header row required)") from None
        return [h.strip() for h in header], list(reader)


def _to_float(cell, path, row, col):
    try:
        x = float(cell)
    except ValueError:
        raise DataError(f"{path}: non-numeric value {cell!r} at row {row}, column {col!r}") from None
    if not math.isfinite(x):
        raise DataError(f"{path}: non-finite value {cell!r} at row {row}, column {col!r}")
    return x


def _columns(header, spec, path):
    if spec.target_column not in header:
        raise DataError(f"{path}: missing target column {spec.target_column!r}")
    skip = {spec.target_column, spec.task_column}
    feats = list(spec.feature_columns) if spec.feature_columns else [h for h in header if h not in skip]
    missing = [f for f in feats if f not in header]
    if missing:
        raise DataError(f"{path}: missing feature columns {missing}")
    return feats


def _parse(rows, header, feats, target, path, first_row=0):
    idx = [header.index(f) for f in feats]
    t_idx = header.index(target)
    X = np.empty((len(rows), len(feats)))
    y = np.empty(len(rows))
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"{path}: row {first_row + r} has {len(row)} cells, expected {len(header)}")
        for c, (k, name) in enumerate(zip(idx, feats)):
            X[r, c] = _to_float(row[k], path, first_row + r, name)
        y[r] = _to_float(row[t_idx], path, first_row + r, target)
    return X, y


def load_dataset(spec: MultiTaskCsv):
    """Read one :class:`TaskData` per task; row indices in errors are 0-based data rows."""
    tasks = []
    if spec.layout == "per_task_files":
        files = sorted(f for f in os.listdir(spec.path) if f.endswith(".csv"))
        if not files:
            raise DataError(f"no CSV files in {spec.path}")
        schema = None
        for name in files:
            path = os.path.join(spec.path, name)
            header, rows = _read_rows(path)
            feats = _columns(header, spec, path)
            if schema is None:
                schema = feats
            elif feats != schema:
                raise DataError(f"{path}: feature schema differs from {files[0]}")
            if not rows:
                raise DataError(f"{path}: task has no samples")
            tasks.append(_parse(rows, header, feats, spec.target_column, path))
    else:
        header, rows = _read_rows(spec.path)
        if spec.task_column not in header:
            raise DataError(f"{spec.path}: missing task column {spec.task_column!r}")
        feats = _columns(header, spec, spec.path)
        X, y = _parse(rows, header, feats, spec.target_column, spec.path)
        ids = [row[header.index(spec.task_column)] for row in rows]
        # task order: first appearance in the file
        order = list(dict.fromkeys(ids))
        ids = np.array(ids, dtype=object)
        tasks = [(X[ids == t], y[ids == t]) for t in order]
    out = []
    for X, y in tasks:
        if spec.add_intercept:
            X = np.column_stack([X, np.ones(len(X))])
        out.append(TaskData(X, y))
    return out


def save_dataset(tasks, out_dir, prefix="task"):
    """Write one CSV per task (``x0..x{d-1}, y``) and return the file paths."""
    os.makedirs(out_dir, exist_ok=True)
    width = max(3, len(str(len(tasks) - 1)))
    paths = []
    for i, t in enumerate(tasks):
        path = os.path.join(out_dir, f"{prefix}_{i:0{width}d}.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{j}" for j in range(t.d)] + ["y"])
            for xr, yr in zip(t.X, t.y):
                w.writerow([repr(float(v)) for v in xr] + [repr(float(yr))])
        paths.append(path)
    return paths


def ratio_split(data, r, seed=0, chronological=False):
    """Per-task train/test split keeping a fraction ``r`` of rows for training."""
    if not 0.0 < r < 1.0:
        raise ValueError("r must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for i, t in enumerate(data):
        N = t.n_samples
        if N < 2:
            raise ValueError(f"task {i} has fewer than 2 rows")
        n_tr = min(max(math.ceil(r * N), 1), N - 1)
        if chronological:
            idx = np.arange(N)
        else:
            idx = rng.permutation(N)
        train.append(t.take(np.sort(idx[:n_tr])))
        test.append(t.take(np.sort(idx[n_tr:])))
    return train, test


def standardize(train, *others, skip_constant=True):
    """Scale features with mean/std pooled over the training rows only.

    Constant columns (an intercept, say) are left untouched.
    """
    Xtr = np.vstack([t.X for t in train])
    mu = Xtr.mean(axis=0)
    sd = Xtr.std(axis=0)
    const = sd == 0
    mu = np.where(const, 0.0, mu) if skip_constant else mu
    sd = np.where(const, 1.0, sd)

    def apply(tasks):
        return [TaskData((t.X - mu) / sd, t.y) for t in tasks]

    return (apply(train),) + tuple(apply(o) for o in others)


def fit_to_dict(result: FitResult) -> dict:
    return {
        "schema_version": FIT_SCHEMA_VERSION,
        "mode": result.mode,
        "models": result.models.tolist(),
        "graph": graph_to_dict(result.graph),
        "hyperparams": result.hyperparams.to_dict(),
        "trace": [asdict(t) for t in result.trace],
        "converged": bool(result.converged),
    }


def fit_from_dict(data: dict) -> FitResult:
    version = data.get("schema_version")
    if version != FIT_SCHEMA_VERSION:
        raise DataError(f"fit schema version {version!r} unsupported (expected {FIT_SCHEMA_VERSION})")
    required = ("models", "graph", "hyperparams", "trace", "converged")
    missing = [k for k in required if k not in data]
    if missing:
        raise DataError(f"fit file (schema v{version}) missing fields: {missing}")
    return FitResult(
        models=np.array(data["models"], dtype=float),
        graph=graph_from_dict(data["graph"]),
        trace=tuple(TraceRecord(**t) for t in data["trace"]),
        converged=bool(data["converged"]),
        hyperparams=HyperParams.from_dict(data["hyperparams"]),
        mode=data.get("mode", "ggmtl"),
    )


def save_fit(result: FitResult, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(fit_to_dict(result), fh, indent=1)


def load_fit(path) -> FitResult:
    with open(path, encoding="utf-8") as fh:
        return fit_from_dict(json.load(fh))


def load_graph(path):
    with open(path, encoding="utf-8") as fh:
        return graph_from_dict(json.load(fh))
