"""Selects the compiled kernels when importable, else the numpy fallback.

Set ``PAIRMMD_BACKEND=python`` to force the fallback.
"""

import os

import numpy as np

from . import _fallback

_impl = _fallback
NAME = "python"
if os.environ.get("PAIRMMD_BACKEND", "").lower() not in ("python", "fallback"):
    try:
        from . import _core as _impl  # noqa: F811
        NAME = "cython"
    except ImportError:  # extension not built
        pass


def _c(a, dtype=float):
    return np.ascontiguousarray(a, dtype=dtype)


def sqdist(A, B, scale=1.0, impl=None):
    return (impl or _impl).sqdist(_c(A), _c(B), float(scale))


def sqdist_sym(A, scale=1.0, impl=None):
    return (impl or _impl).sqdist_sym(_c(A), float(scale))


def quadforms(H, W, impl=None):
    return (impl or _impl).quadforms(_c(H), _c(np.atleast_2d(W)))


def perm_mmd(K, perms, n2, impl=None):
    return (impl or _impl).perm_mmd(_c(K), _c(np.atleast_2d(perms), np.int64), int(n2))


def ar1(w0, eps, a, c, impl=None):
    return (impl or _impl).ar1(_c(np.asarray(w0, dtype=float).reshape(-1)),
                               _c(np.atleast_2d(eps)), float(a), float(c))


def cluster_sweep(G, w, assign, k, max_sweeps, tol, impl=None):
    """Mutates ``assign`` (int64, contiguous) in place."""
    return (impl or _impl).cluster_sweep(_c(G), _c(w), assign, int(k), int(max_sweeps), float(tol))
