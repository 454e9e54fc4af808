"""Pure numpy implementations of the hot kernels.

Signatures mirror the compiled ``_core`` module one-to-one; ``_backend``
picks whichever is available.
"""

import numpy as np
from scipy.signal import lfilter

# rows of A processed per broadcast block, bounds memory at ~block*n*d doubles
_BLOCK = 64


def sqdist(A, B, scale):
    A = np.ascontiguousarray(A, dtype=float)
    B = np.ascontiguousarray(B, dtype=float)
    out = np.empty((A.shape[0], B.shape[0]))
    for s in range(0, A.shape[0], _BLOCK):
        diff = A[s:s + _BLOCK, None, :] - B[None, :, :]
        out[s:s + _BLOCK] = np.einsum("ijk,ijk->ij", diff, diff) * scale
    return out


def sqdist_sym(A, scale):
    D = sqdist(A, A, scale)
    # exact symmetry and zero diagonal regardless of rounding in einsum
    iu = np.triu_indices(D.shape[0], 1)
    D.T[iu] = D[iu]
    np.fill_diagonal(D, 0.0)
    return D


def quadforms(H, W):
    """Row-wise ``W[b] @ H @ W[b]``."""
    H = np.asarray(H, dtype=float)
    W = np.atleast_2d(np.asarray(W, dtype=float))
    out = np.empty(W.shape[0])
    for b in range(W.shape[0]):
        out[b] = W[b] @ (H @ W[b])
    return out


def _split_sums(K, g1, g2):
    s11 = K[np.ix_(g1, g1)].sum()
    s22 = K[np.ix_(g2, g2)].sum()
    # the group holding the smallest index goes first, so relabelled mirror
    # splits reduce in identical order
    if g1[0] < g2[0]:
        s12 = K[np.ix_(g1, g2)].sum()
    else:
        s12 = K[np.ix_(g2, g1)].sum()
    return s11, s22, s12


def perm_mmd(K, perms, n2):
    """Two-sample V-statistic for each relabelling in ``perms``.

    Row ``perms[b]`` is a permutation of ``range(N)``; its first ``n2``
    entries form the first group.
    """
    K = np.asarray(K, dtype=float)
    perms = np.atleast_2d(np.asarray(perms, dtype=np.int64))
    N = K.shape[0]
    n3 = N - n2
    out = np.empty(perms.shape[0])
    for b in range(perms.shape[0]):
        g1 = np.sort(perms[b, :n2])
        g2 = np.sort(perms[b, n2:])
        s11, s22, s12 = _split_sums(K, g1, g2)
        out[b] = s11 / (n2 * n2) + s22 / (n3 * n3) - 2.0 * s12 / (n2 * n3)
    return out


def ar1(w0, eps, a, c):
    """``w_i = a*w_{i-1} + c*eps_i`` for each row, started from ``w0``."""
    eps = np.atleast_2d(np.asarray(eps, dtype=float))
    w0 = np.asarray(w0, dtype=float).reshape(-1)
    zi = (a * w0)[:, None]
    out, _ = lfilter([c], [1.0, -a], eps, axis=1, zi=zi)
    return out


def cluster_sweep(G, w, assign, k, max_sweeps, tol):
    """Greedy single-move local search; mutates ``assign`` in place.

    Returns ``(sweeps, moves, S, v, counts)``: ``moves`` lists
    ``(j, from, to, delta)`` in the order applied, followed by the cached
    per-cluster similarity, weight mass and size.
    """
    G = np.asarray(G, dtype=float)
    w = np.asarray(w, dtype=float)
    n = w.size
    S = np.zeros(k)
    v = np.zeros(k)
    counts = np.zeros(k, dtype=np.int64)
    for c in range(k):
        members = assign == c
        wc = w[members]
        S[c] = wc @ G[np.ix_(members, members)] @ wc
        v[c] = wc.sum()
        counts[c] = members.sum()

    moves = []
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        moved = False
        for j in range(n):
            i = assign[j]
            wj = w[j]
            acc = np.bincount(assign, weights=w * G[j], minlength=k)
            g = wj * wj * G[j, j]
            cur_i = S[i] / v[i]
            if counts[i] == 1:
                minus_i = 0.0
            else:
                minus_i = (S[i] - 2.0 * wj * acc[i] + g) / (v[i] - wj)
            best_l = -1
            best = 0.0
            for l in range(k):
                if l == i:
                    continue
                plus_l = (S[l] + 2.0 * wj * acc[l] + g) / (v[l] + wj)
                cur_l = S[l] / v[l] if counts[l] > 0 else 0.0
                delta = plus_l + minus_i - cur_l - cur_i
                if best_l < 0 or delta > best:
                    best_l, best = l, delta
            if best_l >= 0 and best > tol:
                l = best_l
                if counts[i] == 1:
                    S[i] = 0.0
                    v[i] = 0.0
                else:
                    S[i] = S[i] - 2.0 * wj * acc[i] + g
                    v[i] -= wj
                counts[i] -= 1
                S[l] = S[l] + 2.0 * wj * acc[l] + g
                v[l] += wj
                counts[l] += 1
                assign[j] = l
                moves.append((j, i, l, best))
                moved = True
        if not moved:
            break
    return sweeps, moves, S, v, counts
