"""Weighted kernel clustering of complete pairs.

Pairs are compared with a bivariate Gaussian kernel on the summed squared
distances of both timepoints.  The objective is

    sum_i (1 / v_i) * sum_{j,h in C_i} w_j w_h k(X_j, X_h),   v_i = sum_{j in C_i} w_j

and is increased by single-pair moves until no move helps.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import GridMismatch, PairMMDError
from .kernel import median_of_upper, metric_scale


def pair_sq_distances(x1, x2, metric: str = "wasserstein2") -> np.ndarray:
    """Summed squared distances between pairs, both timepoints."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    x1 = x1.reshape(-1, 1) if x1.ndim == 1 else x1
    x2 = x2.reshape(-1, 1) if x2.ndim == 1 else x2
    if x1.shape != x2.shape:
        raise GridMismatch("the two timepoints have different shapes")
    scale = metric_scale(metric, x1.shape[1])
    return _backend.sqdist_sym(x1, scale) + _backend.sqdist_sym(x2, scale)


def pair_median_heuristic(x1, x2, metric: str = "wasserstein2") -> float:
    return median_of_upper(pair_sq_distances(x1, x2, metric))


def pair_kernel(pj, ph, sigma2: float) -> float:
    """``exp(-(d^2(x1_j, x1_h) + d^2(x2_j, x2_h)) / sigma2)`` for two pairs.

    Pairs are ``(QuantileFunction, QuantileFunction)`` tuples.
    """
    d2 = 0.0
    for a, b in zip(pj, ph):
        if not np.array_equal(a.grid, b.grid):
            raise GridMismatch("quantile functions live on different grids")
        diff = a.values - b.values
        d2 += float(np.mean(diff * diff))
    return float(np.exp(-d2 / sigma2))


def pair_gram(x1, x2, sigma2: float | None = None, metric: str = "wasserstein2"):
    """Bivariate Gram matrix over pairs and the bandwidth it used."""
    D = pair_sq_distances(x1, x2, metric)
    if sigma2 is None:
        sigma2 = median_of_upper(D)
    elif not sigma2 > 0:
        raise PairMMDError(f"kernel bandwidth must be positive, got {sigma2}")
    return np.exp(-D / sigma2), float(sigma2)


@dataclass
class ClusterState:
    """Assignment plus cached per-cluster similarity ``S`` and weight mass ``v``."""

    assignment: np.ndarray
    k: int
    S: np.ndarray
    v: np.ndarray
    counts: np.ndarray
    objective: float
    trace: list = field(default_factory=list)  # objective after each accepted move
    moves: list = field(default_factory=list)  # (j, from, to, delta)
    sweeps: int = 0
    converged: bool = True
    restart: int = 0

    def partition(self) -> frozenset:
        """Label-free view: the set of member index sets."""
        return frozenset(frozenset(np.flatnonzero(self.assignment == c).tolist())
                         for c in range(self.k) if np.any(self.assignment == c))


def cluster_sums(assignment, gram, weights, k: int):
    assignment = np.asarray(assignment)
    w = np.asarray(weights, dtype=float)
    S = np.zeros(k)
    v = np.zeros(k)
    counts = np.zeros(k, dtype=np.int64)
    for c in range(k):
        m = assignment == c
        wc = w[m]
        S[c] = wc @ gram[np.ix_(m, m)] @ wc
        v[c] = wc.sum()
        counts[c] = m.sum()
    return S, v, counts


def objective(assignment, gram, weights, k: int | None = None) -> float:
    """Objective from scratch; empty clusters contribute nothing."""
    if isinstance(assignment, ClusterState):
        k = assignment.k
        assignment = assignment.assignment
    assignment = np.asarray(assignment)
    k = int(assignment.max()) + 1 if k is None else k
    S, v, counts = cluster_sums(assignment, np.asarray(gram, dtype=float), weights, k)
    total = 0.0
    for c in range(k):
        if counts[c] == 0:
            continue
        if not v[c] > 0:
            raise PairMMDError(f"cluster {c} has nonpositive weight mass")
        total += S[c] / v[c]
    return float(total)


def delta_move(j: int, i: int, l: int, state: ClusterState, gram, weights) -> float:
    """Objective change from moving pair ``j`` out of cluster ``i`` into ``l``.

    Uses the cached ``S``/``v`` of ``state`` and does not modify it.
    """
    if i == l:
        raise PairMMDError("source and target clusters coincide")
    if state.assignment[j] != i:
        raise PairMMDError(f"pair {j} is not in cluster {i}")
    w = np.asarray(weights, dtype=float)
    G = np.asarray(gram, dtype=float)
    wj = w[j]
    row = w * G[j]
    si = row[state.assignment == i].sum()
    sl = row[state.assignment == l].sum()
    g = wj * wj * G[j, j]
    cur_i = state.S[i] / state.v[i]
    minus_i = 0.0 if state.counts[i] == 1 else (state.S[i] - 2 * wj * si + g) / (state.v[i] - wj)
    cur_l = state.S[l] / state.v[l] if state.counts[l] > 0 else 0.0
    plus_l = (state.S[l] + 2 * wj * sl + g) / (state.v[l] + wj)
    return float(plus_l + minus_i - cur_l - cur_i)


def initial_assignment(n: int, k: int, rng) -> np.ndarray:
    """Uniform random labels, then every empty cluster steals a pair."""
    assign = rng.integers(k, size=n).astype(np.int64)
    for c in range(k):
        counts = np.bincount(assign, minlength=k)
        if counts[c] > 0:
            continue
        donors = np.flatnonzero(counts[assign] > 1)
        assign[donors[rng.integers(donors.size)]] = c
    return assign


def local_search(gram, weights, assignment, k: int, max_sweeps: int = 100,
                 tol: float | None = None) -> ClusterState:
    """Greedy sweeps from ``assignment`` (copied) until no move improves."""
    G = np.ascontiguousarray(gram, dtype=float)
    w = np.ascontiguousarray(weights, dtype=float)
    assign = np.array(assignment, dtype=np.int64)
    if tol is None:
        tol = 1e-12 * w.sum()
    start = objective(assign, G, w, k)
    sweeps, moves, S, v, counts = _backend.cluster_sweep(G, w, assign, k, max_sweeps, tol)
    trace = [start]
    for m in moves:
        trace.append(trace[-1] + m[3])
    converged = not moves or sweeps < max_sweeps
    return ClusterState(assignment=assign, k=k, S=np.asarray(S), v=np.asarray(v),
                        counts=np.asarray(counts), objective=objective(assign, G, w, k),
                        trace=trace, moves=list(moves), sweeps=sweeps, converged=converged)


def cluster(gram, weights, k: int, max_sweeps: int = 100, seed: int = 0, restarts: int = 5,
            threads: int = 1) -> ClusterState:
    """Best local optimum over ``restarts`` seeded starts.

    ``gram`` covers the pairs being clustered and every weight must be
    positive; callers drop zero-weight pairs first.  Ties between restarts go
    to the lowest restart index.
    """
    G = np.asarray(gram, dtype=float)
    w = np.asarray(weights, dtype=float)
    n = w.size
    if G.shape != (n, n):
        raise PairMMDError("gram matrix does not match the number of weights")
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise PairMMDError("clustering weights must be positive and finite")
    if k < 1:
        raise PairMMDError("need at least one cluster")
    if k > n:
        raise PairMMDError(f"{k} clusters requested for {n} positively weighted pairs")
    if restarts < 1:
        raise PairMMDError("need at least one restart")

    def run(r):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(r,)))
        st = local_search(G, w, initial_assignment(n, k, rng), k, max_sweeps)
        st.restart = r
        return st

    if threads > 1 and restarts > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            states = list(pool.map(run, range(restarts)))
    else:
        states = [run(r) for r in range(restarts)]
    best = states[0]
    for st in states[1:]:
        if st.objective > best.objective:
            best = st
    return best


@dataclass(frozen=True)
class PairClustering:
    """Clustering of a dataset's complete pairs with their IPW weights."""

    ids: tuple  # first-observed ids in layout order
    labels: tuple  # cluster index, or None for unassigned records
    state: ClusterState
    weights: np.ndarray  # over clustered pairs
    bandwidth: float
    members: np.ndarray  # complete-block rows that were clustered

    def mean_curves(self, x1, x2):
        """Weighted mean observation per cluster at each timepoint."""
        x1 = np.asarray(x1, dtype=float)[self.members]
        x2 = np.asarray(x2, dtype=float)[self.members]
        out = []
        for c in range(self.state.k):
            m = self.state.assignment == c
            if not m.any():
                out.append((None, None))
                continue
            wc = self.weights[m] / self.weights[m].sum()
            out.append((wc @ x1[m], wc @ x2[m]))
        return out


def cluster_pairs(ds, weights, k: int, max_sweeps: int = 100, seed: int = 0,
                  restarts: int = 5, bandwidth: float | None = None,
                  threads: int = 1) -> PairClustering:
    """Cluster the complete pairs of ``ds`` that carry positive weight.

    ``weights`` has one entry per first-observed record (complete block
    first), as produced by :func:`pairmmd.missingness.estimate_weights`.
    """
    w = np.asarray(weights, dtype=float)
    if w.size != ds.n1 + ds.n2:
        raise PairMMDError("weights must cover every record with an observed first element")
    wc = w[:ds.n1]
    members = np.flatnonzero(wc > 0)
    if members.size == 0:
        raise PairMMDError("no complete pairs with positive weight")
    G, sigma2 = pair_gram(ds.x1_complete[members], ds.x2_complete[members], bandwidth, ds.metric)
    state = cluster(G, wc[members], k, max_sweeps, seed, restarts, threads)
    labels = [None] * (ds.n1 + ds.n2)
    for pos, row in enumerate(members):
        labels[row] = int(state.assignment[pos])
    return PairClustering(ids=ds.first_observed_ids, labels=tuple(labels), state=state,
                          weights=wc[members], bandwidth=sigma2, members=members)
