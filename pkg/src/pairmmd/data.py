"""Matched-pairs data layout with missing observations.

A dataset is sorted into three blocks: complete pairs, records observed only
at the first timepoint, and records observed only at the second.  Missingness
is carried by block membership; the missingness flags are derived from it.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from numbers import Real

import numpy as np

from .errors import (
    DuplicateRecord,
    GridMismatch,
    HeterogeneousKinds,
    InvalidQuantileFunction,
    PairMMDError,
)

KINDS = ("scalar", "vector", "quantile")


def midpoint_grid(m: int = 100) -> np.ndarray:
    """Equispaced probabilities ``(i - 0.5) / m`` for ``i = 1..m``."""
    if m < 2:
        raise InvalidQuantileFunction(f"grid needs at least 2 points, got {m}")
    return (np.arange(1, m + 1) - 0.5) / m


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.flags.writeable = False
    return arr


def check_grid(grid) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size < 2:
        raise InvalidQuantileFunction("grid must be a 1-d sequence of at least 2 probabilities")
    if not np.all(np.isfinite(g)) or g[0] <= 0.0 or g[-1] >= 1.0:
        raise InvalidQuantileFunction("grid probabilities must lie in the open interval (0, 1)")
    if np.any(np.diff(g) <= 0):
        raise InvalidQuantileFunction("grid must be strictly increasing")
    return g


class QuantileFunction:
    """A distribution represented by its quantile values on a probability grid."""

    __slots__ = ("grid", "values")

    def __init__(self, grid, values):
        g = check_grid(grid)
        v = np.asarray(values, dtype=float)
        if v.shape != g.shape:
            raise InvalidQuantileFunction(
                f"{v.size} values for a grid of {g.size} probabilities")
        if not np.all(np.isfinite(v)):
            raise InvalidQuantileFunction("quantile values must be finite")
        # ties are fine: empirical quantiles repeat order statistics
        if np.any(np.diff(v) < 0):
            raise InvalidQuantileFunction("quantile values must be nondecreasing")
        object.__setattr__(self, "grid", _frozen(g))
        object.__setattr__(self, "values", _frozen(v))

    def __setattr__(self, name, value):
        raise AttributeError("QuantileFunction is immutable")

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, QuantileFunction):
            return NotImplemented
        return (np.array_equal(self.grid, other.grid)
                and np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.grid.tobytes(), self.values.tobytes()))

    def __repr__(self):
        return f"QuantileFunction(m={self.values.size}, range=[{self.values[0]:.4g}, {self.values[-1]:.4g}])"

    def shift(self, c: float) -> "QuantileFunction":
        return QuantileFunction(self.grid, self.values + c)


def observation_kind(payload) -> str:
    if isinstance(payload, QuantileFunction):
        return "quantile"
    if isinstance(payload, (Real, np.floating, np.integer)):
        return "scalar"
    arr = np.asarray(payload, dtype=float)
    if arr.ndim == 0:
        return "scalar"
    if arr.ndim == 1:
        return "vector"
    raise PairMMDError(f"cannot interpret observation of shape {arr.shape}")


def _as_row(payload, kind: str) -> np.ndarray:
    if kind == "quantile":
        return payload.values
    return np.atleast_1d(np.asarray(payload, dtype=float))


@dataclass(frozen=True, eq=False)
class PairedDataset:
    """Validated matched-pairs data.

    Observations are stored as 2-d float arrays (one row per observation).
    Scalars have one column; quantile functions have one column per grid
    probability.  ``covariates`` rows align with :attr:`first_observed_ids`.
    """

    kind: str
    complete_ids: tuple
    first_ids: tuple
    second_ids: tuple
    x1_complete: np.ndarray
    x2_complete: np.ndarray
    x1_only: np.ndarray
    x2_only: np.ndarray
    grid: np.ndarray | None = None
    covariates: np.ndarray | None = None
    covariate_names: tuple = field(default=())

    @property
    def n1(self) -> int:
        return len(self.complete_ids)

    @property
    def n2(self) -> int:
        return len(self.first_ids)

    @property
    def n3(self) -> int:
        return len(self.second_ids)

    @property
    def n(self) -> int:
        return self.n1 + self.n2 + self.n3

    @property
    def dim(self) -> int:
        return self.x1_complete.shape[1]

    @property
    def ids(self) -> tuple:
        return self.complete_ids + self.first_ids + self.second_ids

    @property
    def first_observed_ids(self) -> tuple:
        return self.complete_ids + self.first_ids

    @property
    def delta(self) -> np.ndarray:
        """Flags of shape (2, n) in layout order; 1 marks a missing element."""
        d = np.zeros((2, self.n), dtype=np.int8)
        d[1, self.n1:self.n1 + self.n2] = 1
        d[0, self.n1 + self.n2:] = 1
        return d

    @property
    def metric(self) -> str:
        return "wasserstein2" if self.kind == "quantile" else "euclidean"

    def pooled(self) -> np.ndarray:
        """Every observed observation, both timepoints, all blocks."""
        return np.vstack([self.x1_complete, self.x2_complete, self.x1_only, self.x2_only])

    def observation(self, row: np.ndarray):
        if self.kind == "quantile":
            return QuantileFunction(self.grid, row)
        if self.kind == "scalar":
            return float(row[0])
        return np.array(row)

    def to_records(self) -> list:
        """Long-format ``(id, timepoint, payload)`` records in layout order."""
        out = []
        for i, rid in enumerate(self.complete_ids):
            out.append((rid, 1, self.observation(self.x1_complete[i])))
            out.append((rid, 2, self.observation(self.x2_complete[i])))
        for i, rid in enumerate(self.first_ids):
            out.append((rid, 1, self.observation(self.x1_only[i])))
        for i, rid in enumerate(self.second_ids):
            out.append((rid, 2, self.observation(self.x2_only[i])))
        return out

    def covariate_map(self) -> dict | None:
        if self.covariates is None:
            return None
        return {rid: self.covariates[i] for i, rid in enumerate(self.first_observed_ids)}

    def with_covariates(self, covariates: Mapping, names: Sequence[str] = ()) -> "PairedDataset":
        return validate_dataset(self.to_records(), covariates=covariates,
                                covariate_names=names, grid=self.grid)

    def __eq__(self, other):
        if not isinstance(other, PairedDataset):
            return NotImplemented
        arrays = ("x1_complete", "x2_complete", "x1_only", "x2_only", "grid", "covariates")
        same_arrays = all(
            (getattr(self, a) is None and getattr(other, a) is None)
            or (getattr(self, a) is not None and getattr(other, a) is not None
                and np.array_equal(getattr(self, a), getattr(other, a)))
            for a in arrays)
        return (same_arrays and self.kind == other.kind
                and self.complete_ids == other.complete_ids
                and self.first_ids == other.first_ids
                and self.second_ids == other.second_ids
                and tuple(self.covariate_names) == tuple(other.covariate_names))

    __hash__ = None


def _block(rows: list, dim: int) -> np.ndarray:
    if not rows:
        return _frozen(np.empty((0, dim)))
    return _frozen(np.vstack(rows))


def validate_dataset(records: Iterable, covariates: Mapping | None = None,
                     covariate_names: Sequence[str] = (), grid=None) -> PairedDataset:
    """Group long-format records by id into the three-block layout.

    ``records`` yields ``(id, timepoint, payload)`` with timepoint 1 or 2.
    Block order follows each id's first appearance in ``records``.
    """
    first: dict = {}
    second: dict = {}
    order: list = []
    seen: set = set()
    kind = None
    ref_grid = None if grid is None else check_grid(grid)
    dim = None

    for lineno, rec in enumerate(records):
        try:
            rid, tp, payload = rec
        except (TypeError, ValueError):
            raise PairMMDError(f"record {lineno}: expected (id, timepoint, payload)") from None
        rid = str(rid)
        try:
            tp = int(tp)
        except (TypeError, ValueError):
            raise PairMMDError(f"record {lineno}: timepoint {tp!r} is not 1 or 2") from None
        if tp not in (1, 2):
            raise PairMMDError(f"record {lineno}: timepoint {tp} is not 1 or 2")
        this_kind = observation_kind(payload)
        if kind is None:
            kind = this_kind
        elif this_kind != kind:
            raise HeterogeneousKinds(
                f"record {lineno} (id {rid!r}) is {this_kind}, dataset is {kind}")
        if kind == "quantile":
            if ref_grid is None:
                ref_grid = payload.grid
            elif not np.array_equal(ref_grid, payload.grid):
                raise GridMismatch(f"record {lineno} (id {rid!r}) uses a different quantile grid")
        row = _as_row(payload, kind)
        if not np.all(np.isfinite(row)):
            raise PairMMDError(f"record {lineno} (id {rid!r}) has non-finite values")
        if dim is None:
            dim = row.size
        elif row.size != dim:
            raise HeterogeneousKinds(
                f"record {lineno} (id {rid!r}) has dimension {row.size}, expected {dim}")
        target = first if tp == 1 else second
        if rid in target:
            raise DuplicateRecord(f"id {rid!r} appears twice at timepoint {tp}")
        target[rid] = row
        if rid not in seen:
            seen.add(rid)
            order.append(rid)

    if kind is None:
        raise PairMMDError("dataset has no records")

    complete = [r for r in order if r in first and r in second]
    only1 = [r for r in order if r in first and r not in second]
    only2 = [r for r in order if r in second and r not in first]

    cov = None
    names = tuple(covariate_names)
    if covariates is not None:
        rows = []
        for rid in complete + only1:
            if rid not in covariates:
                raise PairMMDError(f"no covariates for id {rid!r}")
            rows.append(np.atleast_1d(np.asarray(covariates[rid], dtype=float)))
        if rows:
            widths = {r.size for r in rows}
            if len(widths) != 1:
                raise PairMMDError("covariate rows have differing lengths")
            cov = _frozen(np.vstack(rows))
            if names and len(names) != cov.shape[1]:
                raise PairMMDError("covariate names do not match covariate width")

    return PairedDataset(
        kind=kind,
        complete_ids=tuple(complete),
        first_ids=tuple(only1),
        second_ids=tuple(only2),
        x1_complete=_block([first[r] for r in complete], dim),
        x2_complete=_block([second[r] for r in complete], dim),
        x1_only=_block([first[r] for r in only1], dim),
        x2_only=_block([second[r] for r in only2], dim),
        grid=None if ref_grid is None else _frozen(ref_grid),
        covariates=cov,
        covariate_names=names,
    )


def from_arrays(x1_complete, x2_complete, x1_only=None, x2_only=None, *,
                kind: str | None = None, grid=None, covariates=None,
                covariate_names: Sequence[str] = ()) -> PairedDataset:
    """Build a dataset straight from block arrays, with generated ids.

    Ids are ``c0..``, ``f0..`` and ``s0..`` for the three blocks.  ``covariates``
    rows align with the complete block followed by the first-only block.
    """
    def arr(a):
        a = np.asarray(a, dtype=float)
        return a.reshape(-1, 1) if a.ndim == 1 else a

    x1c, x2c = arr(x1_complete), arr(x2_complete)
    dim = x1c.shape[1] if x1c.size else (arr(x1_only).shape[1] if x1_only is not None
                                          else arr(x2_only).shape[1])
    x1o = np.empty((0, dim)) if x1_only is None else arr(x1_only)
    x2o = np.empty((0, dim)) if x2_only is None else arr(x2_only)
    if x1c.shape[0] != x2c.shape[0]:
        raise PairMMDError("complete blocks differ in length")
    if kind is None:
        kind = "quantile" if grid is not None else ("scalar" if dim == 1 else "vector")
    if kind not in KINDS:
        raise PairMMDError(f"unknown observation kind {kind!r}")

    def wrap(row):
        if kind == "quantile":
            return QuantileFunction(grid, row)
        return float(row[0]) if kind == "scalar" else row

    records = []
    for i in range(x1c.shape[0]):
        records.append((f"c{i}", 1, wrap(x1c[i])))
        records.append((f"c{i}", 2, wrap(x2c[i])))
    records += [(f"f{i}", 1, wrap(x1o[i])) for i in range(x1o.shape[0])]
    records += [(f"s{i}", 2, wrap(x2o[i])) for i in range(x2o.shape[0])]
    cov_map = None
    if covariates is not None:
        cov = np.asarray(covariates, dtype=float)
        cov = cov.reshape(-1, 1) if cov.ndim == 1 else cov
        ids = [f"c{i}" for i in range(x1c.shape[0])] + [f"f{i}" for i in range(x1o.shape[0])]
        if cov.shape[0] != len(ids):
            raise PairMMDError("covariates must have one row per first-observed record")
        cov_map = dict(zip(ids, cov))
    return validate_dataset(records, covariates=cov_map, covariate_names=covariate_names,
                            grid=grid if kind == "quantile" else None)


@dataclass(frozen=True)
class TestResult:
    """Outcome of a calibrated test, with enough configuration to replay it."""

    __test__ = False  # not a pytest class

    procedure: str
    statistic: float
    p_value: float
    replicas: np.ndarray
    alpha: float | None
    n_bootstrap: int
    l_param: float
    bandwidth: float
    metric: str
    seed: int
    plus_one: bool = False
    counts: tuple = (0, 0, 0)
    extras: dict = field(default_factory=dict)

    def rejects(self, level: float = 0.05) -> bool:
        return self.p_value <= level
