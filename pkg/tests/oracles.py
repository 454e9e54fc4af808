"""Slow, independent reference implementations used as test oracles.

Plain Python loops over scalar kernel evaluations; nothing here touches the
package's Gram-matrix code paths.
"""

import itertools
import math


def k_gauss(x, y, sigma2):
    d2 = sum((a - b) ** 2 for a, b in zip(x, y))
    return math.exp(-d2 / sigma2)


def k_w2(x, y, sigma2):
    d2 = sum((a - b) ** 2 for a, b in zip(x, y)) / len(x)
    return math.exp(-d2 / sigma2)


def mmd_two_sample(A, B, k):
    p, q = len(A), len(B)
    saa = sum(k(a, b) for a in A for b in A)
    sbb = sum(k(a, b) for a in B for b in B)
    sab = sum(k(a, b) for a in A for b in B)
    return saa / p**2 + sbb / q**2 - 2 * sab / (p * q)


def mmd_weighted(x1, x2, w, k):
    n = len(x1)
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += w[i] * w[j] * (k(x1[i], x1[j]) + k(x2[i], x2[j]) - 2 * k(x1[i], x2[j]))
    return total


def mmd_paired(x1, x2, k):
    n = len(x1)
    return mmd_weighted(x1, x2, [1.0 / n] * n, k)


def cluster_objective(assign, G, w):
    total = 0.0
    for c in set(assign):
        members = [j for j, a in enumerate(assign) if a == c]
        v = sum(w[j] for j in members)
        s = sum(w[j] * w[h] * G[j][h] for j in members for h in members)
        total += s / v
    return total


def splits(N, n_first):
    """Every way to choose the first group of a two-group split of range(N)."""
    return list(itertools.combinations(range(N), n_first))
