"""Calibrated MMD tests for matched pairs with missing observations.

MCAR: the statistic mixes the paired MMD of the complete block with the
two-sample MMD of the incomplete blocks.  Its null distribution is simulated
by an AR(1) wild bootstrap on the complete pairs and random relabelling of
the incomplete observations.

MAR: the complete pairs are reweighted by inverse observation probabilities
and calibrated with the same wild bootstrap, the weights held fixed.

Replica ``b`` draws from its own stream seeded by ``(seed, b)``, so results
do not depend on how replicas are scheduled across threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _backend
from .data import PairedDataset, TestResult
from .errors import IncompatibleAlpha, PairMMDError
from .kernel import KernelSpec, pooled_gram
from .missingness import IpwWeights, estimate_weights
from .mmd import check_weights, clamp, difference_gram, swap_order

# replicas are computed in fixed-size chunks; chunk boundaries never depend
# on the thread count
CHUNK = 64


@dataclass(frozen=True)
class McarConfig:
    alpha: float | None = None  # None: n1 / n
    n_bootstrap: int = 2000
    l_param: float | None = None  # None: sqrt(n1)
    seed: int = 0
    plus_one: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.alpha is not None and not 0.0 <= self.alpha <= 1.0:
            raise PairMMDError(f"alpha must lie in [0, 1], got {self.alpha}")
        _check_common(self.n_bootstrap, self.l_param, self.threads)


@dataclass(frozen=True)
class MarConfig:
    n_bootstrap: int = 2000
    l_param: float | None = None
    seed: int = 0
    normalization: str = "raw"
    pi_floor: float = 0.01
    ridge: float = 1e-6
    plus_one: bool = False
    threads: int = 1

    def __post_init__(self):
        _check_common(self.n_bootstrap, self.l_param, self.threads)
        if not 0.0 < self.pi_floor < 0.5:
            raise PairMMDError(f"pi floor must lie in (0, 0.5), got {self.pi_floor}")
        if self.normalization not in ("raw", "self-normalized"):
            raise PairMMDError(f"unknown weight normalisation {self.normalization!r}")


def _check_common(B, l_param, threads):
    if int(B) != B or B < 1:
        raise PairMMDError(f"number of bootstrap replicas must be a positive integer, got {B}")
    if l_param is not None and not l_param > 0:
        raise PairMMDError(f"wild bootstrap parameter must be positive, got {l_param}")
    if threads < 1:
        raise PairMMDError("threads must be at least 1")


def replica_rng(seed: int, b: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(b),)))


def ar1_coefficients(l_param: float) -> tuple[float, float]:
    a = math.exp(-1.0 / l_param)
    return a, math.sqrt(1.0 - math.exp(-2.0 / l_param))


def ar1_weights(w0, innovations, l_param: float) -> np.ndarray:
    """Run ``w_i = e^{-1/l} w_{i-1} + sqrt(1 - e^{-2/l}) eps_i`` from ``w0``.

    ``innovations`` is ``(n,)`` or ``(B, n)``; ``w0`` is scalar or ``(B,)``.
    """
    eps = np.atleast_2d(np.asarray(innovations, dtype=float))
    start = np.broadcast_to(np.asarray(w0, dtype=float), (eps.shape[0],))
    a, c = ar1_coefficients(l_param)
    out = _backend.ar1(start, eps, a, c)
    return out[0] if np.ndim(innovations) == 1 else out


def wild_weights(n1: int, l_param: float, rng: np.random.Generator, size: int | None = None):
    """Stationary Gaussian AR(1) multipliers of length ``n1`` (unit variance)."""
    if n1 < 1 or not l_param > 0:
        raise PairMMDError("wild weights need n1 >= 1 and l > 0")
    rows = 1 if size is None else size
    w0 = rng.standard_normal(rows)
    eps = rng.standard_normal((rows, n1))
    out = ar1_weights(w0, eps, l_param)
    return out[0] if size is None else out


def default_alpha(ds: PairedDataset) -> float:
    return ds.n1 / ds.n


def default_l(n1: int) -> float:
    return math.sqrt(n1) if n1 > 0 else 1.0


def _map_chunks(fn, B: int, threads: int) -> np.ndarray:
    bounds = [(s, min(s + CHUNK, B)) for s in range(0, B, CHUNK)]
    if threads <= 1 or len(bounds) == 1:
        parts = [fn(s, e) for s, e in bounds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda se: fn(*se), bounds))
    return np.concatenate(parts)


class _McarParts:
    """Gram blocks shared by the statistic and its bootstrap replicas."""

    def __init__(self, ds: PairedDataset, spec: KernelSpec | None, alpha: float):
        if not 0.0 <= alpha <= 1.0:
            raise PairMMDError(f"alpha must lie in [0, 1], got {alpha}")
        if alpha > 0 and ds.n1 == 0:
            raise IncompatibleAlpha(f"alpha={alpha} weights a paired term but there are no complete pairs")
        if alpha < 1 and (ds.n2 == 0 or ds.n3 == 0):
            raise IncompatibleAlpha(
                f"alpha={alpha} < 1 needs records observed at only one timepoint in each "
                f"direction (n2={ds.n2}, n3={ds.n3})")
        if spec is not None and spec.metric != ds.metric:
            raise PairMMDError(f"{ds.kind} observations need the {ds.metric} metric")
        K, sigma2 = pooled_gram(ds.pooled(), ds.metric, None if spec is None else spec.bandwidth)
        n1 = ds.n1
        self.spec = KernelSpec(sigma2, ds.metric)
        self.alpha = alpha
        self.n1, self.n2, self.n3 = n1, ds.n2, ds.n3
        self.H = difference_gram(K[:n1, :n1], K[n1:2 * n1, n1:2 * n1], K[:n1, n1:2 * n1])
        K_inc = K[2 * n1:, 2 * n1:]
        # same block order as mmd_two_sample, so the alpha=0 reduction is exact
        self.n_first = ds.n2
        if swap_order(ds.x1_only, ds.x2_only):
            idx = np.r_[np.arange(ds.n2, ds.n2 + ds.n3), np.arange(ds.n2)]
            K_inc = K_inc[np.ix_(idx, idx)]
            self.n_first = ds.n3
        self.K_inc = np.ascontiguousarray(K_inc)

    @property
    def uses_paired(self) -> bool:
        return self.alpha > 0

    @property
    def uses_unpaired(self) -> bool:
        return self.alpha < 1

    def paired(self, W: np.ndarray) -> np.ndarray:
        return _backend.quadforms(self.H, W) / (self.n1 * self.n1)

    def unpaired(self, perms: np.ndarray) -> np.ndarray:
        return _backend.perm_mmd(self.K_inc, perms, self.n_first)

    def combine(self, t1, t2):
        if not self.uses_unpaired:
            return t1
        if not self.uses_paired:
            return t2
        return self.alpha * t1 + (1.0 - self.alpha) * t2

    def statistic(self) -> tuple[float, float, float]:
        t1 = clamp(self.paired(np.ones((1, self.n1)))[0]) if self.uses_paired else 0.0
        ident = np.arange(self.n2 + self.n3)[None, :]
        t2 = clamp(self.unpaired(ident)[0]) if self.uses_unpaired else 0.0
        return self.combine(t1, t2), t1, t2

    def draw(self, rng: np.random.Generator, l_param: float):
        """Wild weights then relabelling, in that order, from one stream."""
        w = wild_weights(self.n1, l_param, rng) if self.uses_paired else None
        perm = rng.permutation(self.n2 + self.n3) if self.uses_unpaired else None
        return w, perm

    def replicas(self, W, P) -> np.ndarray:
        t1 = self.paired(W) if self.uses_paired else 0.0
        t2 = self.unpaired(P) if self.uses_unpaired else 0.0
        return np.maximum(self.combine(t1, t2), 0.0)


def mcar_statistic(ds: PairedDataset, spec: KernelSpec | None = None,
                   alpha: float | None = None) -> float:
    """``alpha * paired MMD(complete) + (1 - alpha) * two-sample MMD(incomplete)``."""
    a = default_alpha(ds) if alpha is None else alpha
    return _McarParts(ds, spec, a).statistic()[0]


def mcar_bootstrap_replica(ds: PairedDataset, spec: KernelSpec | None, alpha: float | None,
                           rng: np.random.Generator, l_param: float | None = None,
                           weights=None) -> float:
    """One null replica.  ``weights`` overrides the wild multipliers (test hook)."""
    a = default_alpha(ds) if alpha is None else alpha
    parts = _McarParts(ds, spec, a)
    l_val = default_l(ds.n1) if l_param is None else l_param
    w, perm = parts.draw(rng, l_val)
    if weights is not None and parts.uses_paired:
        w = np.asarray(weights, dtype=float)
    W = None if w is None else w[None, :]
    P = None if perm is None else perm[None, :]
    return float(parts.replicas(W, P)[0])


def p_value(statistic: float, replicas: np.ndarray, plus_one: bool = False) -> float:
    """Share of replicas at or above the statistic; ties count as exceedances."""
    hits = int(np.count_nonzero(replicas >= statistic))
    if plus_one:
        return (1 + hits) / (1 + replicas.size)
    return hits / replicas.size


def mcar_test(ds: PairedDataset, config: McarConfig = McarConfig(),
              spec: KernelSpec | None = None) -> TestResult:
    alpha = default_alpha(ds) if config.alpha is None else config.alpha
    parts = _McarParts(ds, spec, alpha)
    l_val = default_l(ds.n1) if config.l_param is None else config.l_param
    T, t1, t2 = parts.statistic()

    def chunk(s, e):
        draws = [parts.draw(replica_rng(config.seed, b), l_val) for b in range(s, e)]
        W = np.vstack([d[0] for d in draws]) if parts.uses_paired else None
        P = np.vstack([d[1] for d in draws]) if parts.uses_unpaired else None
        return parts.replicas(W, P)

    reps = _map_chunks(chunk, config.n_bootstrap, config.threads)
    return TestResult(
        procedure="mcar", statistic=T, p_value=p_value(T, reps, config.plus_one),
        replicas=reps, alpha=alpha, n_bootstrap=config.n_bootstrap, l_param=l_val,
        bandwidth=parts.spec.bandwidth, metric=parts.spec.metric, seed=config.seed,
        plus_one=config.plus_one, counts=(ds.n1, ds.n2, ds.n3),
        extras={"paired_statistic": t1, "unpaired_statistic": t2},
    )


class _MarParts:
    def __init__(self, ds: PairedDataset, spec: KernelSpec | None):
        if ds.n1 < 1:
            raise PairMMDError("no complete pairs")
        if spec is not None and spec.metric != ds.metric:
            raise PairMMDError(f"{ds.kind} observations need the {ds.metric} metric")
        # second-only records carry no weight but still inform the bandwidth
        K, sigma2 = pooled_gram(ds.pooled(), ds.metric, None if spec is None else spec.bandwidth)
        n1 = ds.n1
        self.spec = KernelSpec(sigma2, ds.metric)
        self.n1 = n1
        self.H = difference_gram(K[:n1, :n1], K[n1:2 * n1, n1:2 * n1], K[:n1, n1:2 * n1])

    def weighted(self, V: np.ndarray) -> np.ndarray:
        return _backend.quadforms(self.H, V)


def mar_statistic(ds: PairedDataset, weights, spec: KernelSpec | None = None) -> float:
    """IPW-weighted paired MMD over the complete block; one weight per complete pair."""
    parts = _MarParts(ds, spec)
    w = check_weights(weights, ds.n1)
    return clamp(parts.weighted(w[None, :])[0])


def mar_test(ds: PairedDataset, config: MarConfig = MarConfig(),
             spec: KernelSpec | None = None, weights: IpwWeights | None = None) -> TestResult:
    """Weighted test under MAR.  ``weights`` skips estimation when supplied."""
    if ds.n1 < 2:
        raise PairMMDError(f"the MAR test needs at least 2 complete pairs, got {ds.n1}")
    model = None
    if weights is None:
        weights, model = estimate_weights(ds, config.pi_floor, config.ridge, config.normalization)
    omega = check_weights(weights.complete, ds.n1)
    parts = _MarParts(ds, spec)
    l_val = default_l(ds.n1) if config.l_param is None else config.l_param
    T = clamp(parts.weighted(omega[None, :])[0])

    def chunk(s, e):
        W = np.vstack([wild_weights(ds.n1, l_val, replica_rng(config.seed, b))
                       for b in range(s, e)])
        return np.maximum(parts.weighted(W * omega[None, :]), 0.0)

    reps = _map_chunks(chunk, config.n_bootstrap, config.threads)
    extras = {"weights": omega, "weight_total": float(omega.sum()),
              "normalization": weights.mode, "pi_floor": config.pi_floor,
              "ridge": config.ridge}
    if model is not None:
        extras["logistic_coef"] = model.coef
        extras["logistic_iterations"] = model.n_iter
    return TestResult(
        procedure="mar", statistic=T, p_value=p_value(T, reps, config.plus_one),
        replicas=reps, alpha=None, n_bootstrap=config.n_bootstrap, l_param=l_val,
        bandwidth=parts.spec.bandwidth, metric=parts.spec.metric, seed=config.seed,
        plus_one=config.plus_one, counts=(ds.n1, ds.n2, ds.n3), extras=extras,
    )
