"""Long-format CSV ingestion and report emission.

Dataset CSV: ``id,timepoint,<payload...>``.  When every payload header is a
probability in (0, 1) and there are at least two of them, rows are quantile
functions on that grid; otherwise each row is a Euclidean point.  Covariates
CSV: ``id,<feature...>``.  Floats are written with ``repr`` so files
round-trip exactly.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .data import PairedDataset, QuantileFunction, check_grid, validate_dataset
from .errors import PairMMDError


class InputError(PairMMDError):
    """Unreadable or malformed input file."""


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if x is None:
        return ""
    return str(x)


def _read_rows(path):
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [(i + 1, r) for i, r in enumerate(csv.reader(fh)) if any(c.strip() for c in r)]
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: cannot read ({exc})") from None
    if not rows:
        raise InputError(f"{path}: empty file")
    return rows


def _floats(path, lineno, cells):
    try:
        return np.array([float(c) for c in cells])
    except ValueError:
        bad = next(c for c in cells if not _is_float(c))
        raise InputError(f"{path}:{lineno}: {bad!r} is not a number") from None


def _is_float(s) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def _quantile_grid(payload_headers):
    if len(payload_headers) < 2 or not all(_is_float(h) for h in payload_headers):
        return None
    g = np.array([float(h) for h in payload_headers])
    if np.all((g > 0) & (g < 1)):
        return g
    return None


def read_dataset(path, covariates_path=None) -> PairedDataset:
    rows = _read_rows(path)
    header_line, header = rows[0]
    header = [h.strip() for h in header]
    if len(header) < 3 or header[0] != "id" or header[1] != "timepoint":
        raise InputError(f"{path}:{header_line}: header must start with id,timepoint "
                         "followed by at least one payload column")
    payload = header[2:]
    grid = _quantile_grid(payload)
    if grid is not None:
        try:
            check_grid(grid)
        except PairMMDError as exc:
            raise InputError(f"{path}:{header_line}: {exc}") from None
    width = len(header)
    records = []
    for lineno, row in rows[1:]:
        if len(row) != width:
            raise InputError(f"{path}:{lineno}: expected {width} fields, found {len(row)}")
        rid = row[0].strip()
        if not rid:
            raise InputError(f"{path}:{lineno}: empty id")
        tp = row[1].strip()
        if tp not in ("1", "2"):
            raise InputError(f"{path}:{lineno}: timepoint {tp!r} is not 1 or 2")
        vals = _floats(path, lineno, row[2:])
        try:
            if grid is not None:
                obs = QuantileFunction(grid, vals)
            elif vals.size == 1:
                obs = float(vals[0])
            else:
                obs = vals
        except PairMMDError as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from None
        records.append((rid, int(tp), obs))
    if not records:
        raise InputError(f"{path}: no data rows")
    cov, names = (None, ())
    if covariates_path is not None:
        cov, names = read_covariates(covariates_path)
    try:
        return validate_dataset(records, covariates=cov, covariate_names=names, grid=grid)
    except PairMMDError as exc:
        raise InputError(f"{path}: {exc}") from None


def read_covariates(path):
    rows = _read_rows(path)
    header_line, header = rows[0]
    header = [h.strip() for h in header]
    if len(header) < 2 or header[0] != "id":
        raise InputError(f"{path}:{header_line}: header must be id,<feature...>")
    out = {}
    for lineno, row in rows[1:]:
        if len(row) != len(header):
            raise InputError(f"{path}:{lineno}: expected {len(header)} fields, found {len(row)}")
        rid = row[0].strip()
        if rid in out:
            raise InputError(f"{path}:{lineno}: duplicate id {rid!r}")
        vals = _floats(path, lineno, row[1:])
        if not np.all(np.isfinite(vals)):
            raise InputError(f"{path}:{lineno}: non-finite covariate")
        out[rid] = vals
    return out, tuple(header[1:])


def write_dataset(ds: PairedDataset, path) -> None:
    if ds.kind == "quantile":
        payload = [fmt(t) for t in ds.grid]
    elif ds.kind == "scalar":
        payload = ["value"]
    else:
        payload = [f"x{i}" for i in range(ds.dim)]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "timepoint", *payload])
        blocks = [(ds.complete_ids, ds.x1_complete, 1), (ds.first_ids, ds.x1_only, 1),
                  (ds.second_ids, ds.x2_only, 2)]
        for i, rid in enumerate(ds.complete_ids):
            w.writerow([rid, 1, *map(fmt, ds.x1_complete[i])])
            w.writerow([rid, 2, *map(fmt, ds.x2_complete[i])])
        for ids, X, tp in blocks[1:]:
            for i, rid in enumerate(ids):
                w.writerow([rid, tp, *map(fmt, X[i])])


def write_covariates(ds: PairedDataset, path) -> None:
    if ds.covariates is None:
        raise PairMMDError("dataset carries no covariates")
    names = ds.covariate_names or tuple(f"z{i}" for i in range(ds.covariates.shape[1]))
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", *names])
        for rid, row in zip(ds.first_observed_ids, ds.covariates):
            w.writerow([rid, *map(fmt, row)])


def write_table(path, header, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(c) for c in r])


def format_report(items) -> str:
    return "".join(f"{k}={fmt(v)}\n" for k, v in items)


def parse_report(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise InputError(f"report line {lineno}: expected key=value")
        out[key] = value
    return out
