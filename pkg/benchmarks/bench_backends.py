"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_backends.py [--repeat 5]

Each kernel is run on the same inputs through both implementations; the
table reports the best wall time of ``--repeat`` runs and the largest
absolute difference between the two outputs.
"""

import argparse
import timeit

import numpy as np

from pairmmd import _backend, _fallback

try:
    from pairmmd import _core
except ImportError:
    _core = None


def cases(rng):
    X = rng.normal(size=(300, 100))
    K = np.exp(-_backend.sqdist_sym(X, 0.01))
    n1 = 150
    H = K[:n1, :n1] + K[n1:, n1:] - K[:n1, n1:] - K[n1:, :n1]
    W = rng.normal(size=(64, n1))
    perms = np.vstack([rng.permutation(300) for _ in range(64)])
    eps = rng.normal(size=(64, n1))
    G = np.exp(-_backend.sqdist_sym(rng.normal(size=(200, 5)), 0.2))
    w = rng.uniform(0.5, 1.5, 200)
    a0 = rng.integers(4, size=200)

    def sweep(impl):
        return impl.cluster_sweep(G, w, a0.astype(np.int64).copy(), 4, 100, 1e-12)[2]

    return {
        "sqdist_sym 300x100": lambda impl: impl.sqdist_sym(X, 0.01),
        "quadforms 64x150": lambda impl: impl.quadforms(H, W),
        "perm_mmd 64x300": lambda impl: impl.perm_mmd(K, perms, 150),
        "ar1 64x150": lambda impl: impl.ar1(rng.normal(size=64), eps, 0.92, 0.39),
        "cluster_sweep n=200 k=4": sweep,
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"selected backend: {_backend.NAME}")
    if _core is None:
        print("compiled core not built; only the fallback can be timed")
    print(f"{'kernel':<26}{'numpy ms':>10}{'cython ms':>11}{'speedup':>9}{'max diff':>11}")
    for name, fn in cases(rng).items():
        t_py = min(timeit.repeat(lambda: fn(_fallback), number=1, repeat=args.repeat))
        if _core is None:
            print(f"{name:<26}{t_py * 1e3:>10.2f}")
            continue
        t_c = min(timeit.repeat(lambda: fn(_core), number=1, repeat=args.repeat))
        if name.startswith("ar1"):
            # fresh starting values per call; compare on a fixed one
            w0 = np.ones(64)
            eps = np.random.default_rng(1).normal(size=(64, 150))
            diff = np.max(np.abs(_fallback.ar1(w0, eps, 0.92, 0.39) - _core.ar1(w0, eps, 0.92, 0.39)))
        else:
            diff = np.max(np.abs(np.asarray(fn(_fallback)) - np.asarray(fn(_core))))
        print(f"{name:<26}{t_py * 1e3:>10.2f}{t_c * 1e3:>11.2f}{t_py / t_c:>9.1f}{diff:>11.2e}")


if __name__ == "__main__":
    main()
