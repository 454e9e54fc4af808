# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels.  Same call signatures as ``pairmmd._fallback``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def sqdist(const double[:, ::1] A, const double[:, ::1] B, double scale):
    cdef Py_ssize_t n = A.shape[0], m = B.shape[0], d = A.shape[1]
    cdef Py_ssize_t i, j, t
    cdef double s, diff
    out = np.empty((n, m))
    cdef double[:, ::1] D = out
    with nogil:
        for i in range(n):
            for j in range(m):
                s = 0.0
                for t in range(d):
                    diff = A[i, t] - B[j, t]
                    s += diff * diff
                D[i, j] = s * scale
    return out


def sqdist_sym(const double[:, ::1] A, double scale):
    cdef Py_ssize_t n = A.shape[0], d = A.shape[1]
    cdef Py_ssize_t i, j, t
    cdef double s, diff
    out = np.zeros((n, n))
    cdef double[:, ::1] D = out
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                s = 0.0
                for t in range(d):
                    diff = A[i, t] - A[j, t]
                    s += diff * diff
                D[i, j] = s * scale
                D[j, i] = s * scale
    return out


def quadforms(const double[:, ::1] H, const double[:, ::1] W):
    cdef Py_ssize_t nb = W.shape[0], n = W.shape[1]
    cdef Py_ssize_t b, i, j
    cdef double total, row
    out = np.empty(nb)
    cdef double[::1] res = out
    with nogil:
        for b in range(nb):
            total = 0.0
            for i in range(n):
                row = 0.0
                for j in range(n):
                    row += H[i, j] * W[b, j]
                total += W[b, i] * row
            res[b] = total
    return out


def perm_mmd(const double[:, ::1] K, const long long[:, ::1] perms, Py_ssize_t n2):
    cdef Py_ssize_t nb = perms.shape[0], N = K.shape[0]
    cdef Py_ssize_t n3 = N - n2
    cdef Py_ssize_t b, i, j
    cdef double s11, s22, s12, diag1, diag2
    cdef unsigned char li
    labels_arr = np.empty(N, dtype=np.uint8)
    cdef unsigned char[::1] lab = labels_arr
    out = np.empty(nb)
    cdef double[::1] res = out
    with nogil:
        for b in range(nb):
            for i in range(n2):
                lab[perms[b, i]] = 0
            for i in range(n2, N):
                lab[perms[b, i]] = 1
            s11 = 0.0
            s22 = 0.0
            s12 = 0.0
            diag1 = 0.0
            diag2 = 0.0
            # index-ordered upper triangle: relabelled mirror splits reduce identically
            for i in range(N):
                li = lab[i]
                if li == 0:
                    diag1 += K[i, i]
                else:
                    diag2 += K[i, i]
                for j in range(i + 1, N):
                    if li != lab[j]:
                        s12 += K[i, j]
                    elif li == 0:
                        s11 += K[i, j]
                    else:
                        s22 += K[i, j]
            s11 = diag1 + 2.0 * s11
            s22 = diag2 + 2.0 * s22
            res[b] = s11 / <double>(n2 * n2) + s22 / <double>(n3 * n3) - 2.0 * s12 / <double>(n2 * n3)
    return out


def ar1(const double[::1] start, const double[:, ::1] E, double a, double c):
    cdef Py_ssize_t nb = E.shape[0], n = E.shape[1]
    cdef Py_ssize_t b, i
    cdef double prev
    out = np.empty((nb, n))
    cdef double[:, ::1] W = out
    with nogil:
        for b in range(nb):
            prev = start[b]
            for i in range(n):
                prev = a * prev + c * E[b, i]
                W[b, i] = prev
    return out


def cluster_sweep(const double[:, ::1] G, const double[::1] w, long long[::1] assign,
                  Py_ssize_t k, Py_ssize_t max_sweeps, double tol):
    cdef Py_ssize_t n = w.shape[0]
    cdef Py_ssize_t j, h, l, i, c, best_l, sweeps = 0
    cdef double wj, g, cur_i, minus_i, plus_l, cur_l, delta, best
    cdef bint moved
    S_arr = np.zeros(k)
    v_arr = np.zeros(k)
    acc_arr = np.zeros(k)
    cnt_arr = np.zeros(k, dtype=np.int64)
    cdef double[::1] S = S_arr
    cdef double[::1] v = v_arr
    cdef double[::1] acc = acc_arr
    cdef long long[::1] counts = cnt_arr
    moves = []

    for j in range(n):
        c = assign[j]
        v[c] += w[j]
        counts[c] += 1
        for h in range(n):
            if assign[h] == c:
                S[c] += w[j] * w[h] * G[j, h]

    while sweeps < max_sweeps:
        sweeps += 1
        moved = False
        for j in range(n):
            i = assign[j]
            wj = w[j]
            for l in range(k):
                acc[l] = 0.0
            for h in range(n):
                acc[assign[h]] += w[h] * G[j, h]
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
                    best_l = l
                    best = delta
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
    return sweeps, moves, S_arr, v_arr, cnt_arr
