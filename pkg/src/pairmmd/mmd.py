"""Biased (V-statistic) MMD estimators for two-sample and paired data.

Everything goes through Gram matrices; feature maps are never formed.
"""

from __future__ import annotations

import numpy as np

from . import _backend
from .errors import InternalConsistencyError, PairMMDError
from .kernel import KernelSpec, as_points, metric_scale

# negatives above this are round-off and clamp to 0
ROUND_OFF = -1e-12


def clamp(value: float) -> float:
    if value < 0.0:
        if value < ROUND_OFF:
            raise InternalConsistencyError(f"MMD estimate {value!r} is negative beyond round-off")
        return 0.0
    return float(value)


def difference_gram(K11: np.ndarray, K22: np.ndarray, K12: np.ndarray) -> np.ndarray:
    """``H[i, j] = k(x1_i, x1_j) + k(x2_i, x2_j) - k(x1_i, x2_j) - k(x2_i, x1_j)``.

    This is the Gram matrix of the paired feature differences, so every
    quadratic form in it is nonnegative.
    """
    return K11 + K22 - (K12 + K12.T)


def split_mmd(K: np.ndarray, n_first: int) -> float:
    """Two-sample statistic when rows ``[:n_first]`` of ``K`` are the first sample."""
    N = K.shape[0]
    return clamp(_backend.perm_mmd(K, np.arange(N)[None, :], n_first)[0])


def _gram_blocks(X1: np.ndarray, X2: np.ndarray, spec: KernelSpec):
    if X1.shape[1] != X2.shape[1]:
        raise PairMMDError("samples differ in dimension")
    scale = metric_scale(spec.metric, X1.shape[1])
    D = _backend.sqdist_sym(np.vstack([X1, X2]), scale)
    return np.exp(-D / spec.bandwidth)


def swap_order(XA: np.ndarray, XB: np.ndarray) -> bool:
    """Whether ``XB`` goes first in the canonical block order.

    Fixing the order makes the reduction, and so the rounding, identical for
    ``(A, B)`` and ``(B, A)``.
    """
    return (XB.shape, XB.tobytes()) < (XA.shape, XA.tobytes())


def mmd_two_sample(A, B, spec: KernelSpec) -> float:
    """``mean k(a, a') + mean k(b, b') - 2 mean k(a, b)`` over all index pairs."""
    XA = as_points(A, spec.metric)
    XB = as_points(B, spec.metric)
    if XA.shape[0] == 0 or XB.shape[0] == 0:
        raise PairMMDError("both samples need at least one observation")
    if swap_order(XA, XB):
        XA, XB = XB, XA
    return split_mmd(_gram_blocks(XA, XB, spec), XA.shape[0])


def _paired_H(x1, x2, spec: KernelSpec) -> np.ndarray:
    X1 = as_points(x1, spec.metric)
    X2 = as_points(x2, spec.metric)
    if X1.shape[0] != X2.shape[0]:
        raise PairMMDError("paired samples differ in length")
    if X1.shape[0] == 0:
        raise PairMMDError("no complete pairs")
    n = X1.shape[0]
    K = _gram_blocks(X1, X2, spec)
    return difference_gram(K[:n, :n], K[n:, n:], K[:n, n:])


def mmd_paired(x1, x2, spec: KernelSpec) -> float:
    """MMD between the two columns of complete pairs ``(x1[i], x2[i])``."""
    H = _paired_H(x1, x2, spec)
    n = H.shape[0]
    return clamp(_backend.quadforms(H, np.ones((1, n)))[0] / (n * n))


def mmd_weighted(x1, x2, weights, spec: KernelSpec) -> float:
    """``sum_ij w_i w_j H_ij``: squared distance of the weighted mean embeddings."""
    H = _paired_H(x1, x2, spec)
    w = check_weights(weights, H.shape[0])
    return clamp(_backend.quadforms(H, w[None, :])[0])


def check_weights(weights, n: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float).ravel()
    if w.size != n:
        raise PairMMDError(f"{w.size} weights for {n} pairs")
    if not np.all(np.isfinite(w)):
        raise PairMMDError("weights must be finite")
    if np.any(w < 0):
        raise PairMMDError("weights must be nonnegative")
    if not np.any(w > 0):
        raise PairMMDError("at least one weight must be positive")
    return w
