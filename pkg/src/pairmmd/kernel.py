"""Gaussian kernels over Euclidean points and quantile functions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .data import QuantileFunction
from .errors import DegenerateBandwidth, GridMismatch, HeterogeneousKinds, PairMMDError

METRICS = ("euclidean", "wasserstein2")


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian kernel ``exp(-d^2 / bandwidth)`` over the chosen base metric.

    ``bandwidth`` is sigma squared, not sigma.
    """

    bandwidth: float
    metric: str = "euclidean"

    def __post_init__(self):
        if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise PairMMDError(f"kernel bandwidth must be positive, got {self.bandwidth}")
        if self.metric not in METRICS:
            raise PairMMDError(f"unknown metric {self.metric!r}; expected one of {METRICS}")


def metric_scale(metric: str, dim: int) -> float:
    """Factor turning a sum of squared coordinate gaps into the squared distance.

    Quantile functions use the grid mean, which is the midpoint-rule integral
    of the squared quantile difference.
    """
    return 1.0 / dim if metric == "wasserstein2" else 1.0


def as_points(points, metric: str | None = None) -> np.ndarray:
    """Stack a sequence of observations into an ``(n, d)`` float array."""
    if isinstance(points, np.ndarray):
        arr = points.astype(float, copy=False)
        return arr.reshape(-1, 1) if arr.ndim == 1 else arr
    points = list(points)
    if not points:
        return np.empty((0, 1))
    is_q = [isinstance(p, QuantileFunction) for p in points]
    if any(is_q) and not all(is_q):
        raise HeterogeneousKinds("mixed quantile and Euclidean observations")
    if all(is_q):
        grid = points[0].grid
        if any(not np.array_equal(p.grid, grid) for p in points[1:]):
            raise GridMismatch("quantile functions live on different grids")
        if metric == "euclidean":
            raise HeterogeneousKinds("quantile observations need the wasserstein2 metric")
        return np.vstack([p.values for p in points])
    if metric == "wasserstein2":
        raise HeterogeneousKinds("the wasserstein2 metric needs quantile observations")
    rows = [np.atleast_1d(np.asarray(p, dtype=float)) for p in points]
    if len({r.size for r in rows}) != 1:
        raise HeterogeneousKinds("observations differ in dimension")
    return np.vstack(rows)


def _sq_distance(x, y, metric: str) -> float:
    xq, yq = isinstance(x, QuantileFunction), isinstance(y, QuantileFunction)
    if xq != yq:
        raise HeterogeneousKinds("cannot compare a quantile function with a Euclidean point")
    if metric == "wasserstein2":
        if not xq:
            raise HeterogeneousKinds("the wasserstein2 metric needs quantile observations")
        if not np.array_equal(x.grid, y.grid):
            raise GridMismatch("quantile functions live on different grids")
        d = x.values - y.values
        return float(np.mean(d * d))
    if xq:
        raise HeterogeneousKinds("quantile observations need the wasserstein2 metric")
    a = np.atleast_1d(np.asarray(x, dtype=float))
    b = np.atleast_1d(np.asarray(y, dtype=float))
    if a.shape != b.shape:
        raise HeterogeneousKinds("points differ in dimension")
    d = a - b
    return float(d @ d)


def kernel_eval(x, y, spec: KernelSpec) -> float:
    return float(np.exp(-_sq_distance(x, y, spec.metric) / spec.bandwidth))


def pairwise_sq_distances(A, metric: str = "euclidean") -> np.ndarray:
    X = as_points(A, metric)
    return _backend.sqdist_sym(X, metric_scale(metric, X.shape[1]))


def median_of_upper(D: np.ndarray) -> float:
    """Median of the strict upper triangle; raises when it is not positive."""
    n = D.shape[0]
    if n < 2:
        raise DegenerateBandwidth("median heuristic needs at least 2 points")
    vals = D[np.triu_indices(n, 1)]
    med = float(np.median(vals))
    if not med > 0:
        if not np.any(vals > 0):
            raise DegenerateBandwidth("all observations coincide; every pairwise distance is 0")
        raise DegenerateBandwidth(
            "more than half of the pairwise distances are 0; set the bandwidth explicitly")
    return med


def median_heuristic(points, metric: str = "euclidean") -> float:
    """Median of the squared pairwise distances over ``i < j``."""
    X = as_points(points, metric)
    if X.shape[0] < 2:
        raise DegenerateBandwidth("median heuristic needs at least 2 points")
    return median_of_upper(pairwise_sq_distances(X, metric))


def gram(A, B, spec: KernelSpec) -> np.ndarray:
    """Matrix of ``k(A_i, B_j)``; symmetric fast path when ``B is A``."""
    XA = as_points(A, spec.metric)
    scale = metric_scale(spec.metric, XA.shape[1])
    if B is A:
        D = _backend.sqdist_sym(XA, scale)
    else:
        XB = as_points(B, spec.metric)
        if XB.shape[1] != XA.shape[1]:
            raise HeterogeneousKinds("observation sets differ in dimension")
        D = _backend.sqdist(XA, XB, scale)
    return np.exp(-D / spec.bandwidth)


def pooled_gram(X: np.ndarray, metric: str, bandwidth: float | None = None):
    """Gram matrix of the rows of ``X`` and the bandwidth it used.

    Without an explicit bandwidth the median heuristic over all rows is used.
    """
    D = _backend.sqdist_sym(X, metric_scale(metric, X.shape[1]))
    sigma2 = median_of_upper(D) if bandwidth is None else float(bandwidth)
    KernelSpec(sigma2, metric)  # validates
    return np.exp(-D / sigma2), sigma2
