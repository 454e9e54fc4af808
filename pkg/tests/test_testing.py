import itertools
import math

import numpy as np
import pytest
from scipy.stats import binom

import oracles

from pairmmd.data import from_arrays
from pairmmd.errors import DegenerateBandwidth, IncompatibleAlpha, PairMMDError
from pairmmd.kernel import KernelSpec
from pairmmd.missingness import ipw_from_probabilities
from pairmmd.mmd import mmd_paired, mmd_two_sample, mmd_weighted
from pairmmd.testing import (MarConfig, McarConfig, ar1_weights, default_alpha, default_l,
                             mar_statistic, mar_test, mcar_bootstrap_replica, mcar_statistic,
                             mcar_test, p_value, replica_rng, wild_weights)


def scalar_ds(n1=8, n2=6, n3=5, shift=0.0, seed=0):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=n1)
    return from_arrays(z + rng.normal(size=n1) * 0.5,
                       z + rng.normal(size=n1) * 0.5 + shift,
                       rng.normal(size=n2), rng.normal(size=n3) + shift)


class TestWildWeights:
    def test_zero_noise(self):
        l = 3.0
        w = ar1_weights(1.0, np.zeros(6), l)
        np.testing.assert_allclose(w, np.exp(-np.arange(1, 7) / l), rtol=1e-14)

    def test_batch_matches_rows(self):
        rng = np.random.default_rng(0)
        eps = rng.normal(size=(3, 5))
        w0 = rng.normal(size=3)
        W = ar1_weights(w0, eps, 2.0)
        for r in range(3):
            np.testing.assert_array_equal(W[r], ar1_weights(w0[r], eps[r], 2.0))

    def test_stationary_moments(self):
        rng = np.random.default_rng(1)
        l = 10.0
        W = wild_weights(40, l, rng, size=20000)
        var = W.var(axis=0)
        assert np.all((var > 0.95) & (var < 1.05))
        lag1 = np.mean(W[:, 1:] * W[:, :-1])
        assert abs(lag1 - math.exp(-1 / l)) < 0.02

    def test_errors(self):
        with pytest.raises(PairMMDError):
            wild_weights(0, 1.0, np.random.default_rng(0))
        with pytest.raises(PairMMDError):
            wild_weights(5, 0.0, np.random.default_rng(0))


class TestMcarStatistic:
    def test_alpha_one_is_paired(self):
        ds = scalar_ds()
        spec = KernelSpec(1.7)
        assert mcar_statistic(ds, spec, 1.0) == mmd_paired(ds.x1_complete, ds.x2_complete, spec)

    def test_alpha_zero_is_two_sample(self):
        for seed in range(5):
            ds = scalar_ds(seed=seed)
            spec = KernelSpec(0.9)
            assert mcar_statistic(ds, spec, 0.0) == mmd_two_sample(ds.x1_only, ds.x2_only, spec)

    def test_mixture(self):
        ds = scalar_ds()
        spec = KernelSpec(1.1)
        a = 0.3
        ref = (a * mmd_paired(ds.x1_complete, ds.x2_complete, spec)
               + (1 - a) * mmd_two_sample(ds.x1_only, ds.x2_only, spec))
        assert mcar_statistic(ds, spec, a) == pytest.approx(ref, rel=1e-13)

    def test_constant_data(self):
        ds = from_arrays(np.full(4, 2.0), np.full(4, 2.0), np.full(3, 2.0), np.full(2, 2.0))
        assert mcar_statistic(ds, KernelSpec(1.0)) == 0.0
        with pytest.raises(DegenerateBandwidth):
            mcar_statistic(ds)

    def test_incompatible_alpha(self):
        ds = from_arrays([1.0, 2.0], [1.5, 2.5])
        with pytest.raises(IncompatibleAlpha):
            mcar_statistic(ds, alpha=0.5)
        ds0 = from_arrays(np.empty(0), np.empty(0), [1.0, 2.0], [0.0, 3.0])
        with pytest.raises(IncompatibleAlpha):
            mcar_statistic(ds0, alpha=0.5)
        assert mcar_statistic(ds0, alpha=0.0) > 0

    def test_default_alpha_and_l(self):
        ds = scalar_ds(4, 3, 2)
        assert default_alpha(ds) == 4 / 9
        assert default_l(49) == 7.0


class TestMcarReplica:
    def test_constant_data(self):
        ds = from_arrays(np.full(4, 1.0), np.full(4, 1.0), np.full(3, 1.0), np.full(2, 1.0))
        rng = np.random.default_rng(0)
        assert mcar_bootstrap_replica(ds, KernelSpec(1.0), 0.5, rng) == 0.0

    def test_unit_weights_hook(self):
        ds = scalar_ds()
        spec = KernelSpec(1.3)
        rep = mcar_bootstrap_replica(ds, spec, 1.0, np.random.default_rng(0),
                                     weights=np.ones(ds.n1))
        assert rep == mcar_statistic(ds, spec, 1.0)

    def test_two_point_relabelling_frequencies(self):
        ds = from_arrays(np.empty(0), np.empty(0), [0.0], [1.0])
        rng = np.random.default_rng(0)
        perms = np.array([rng.permutation(2) for _ in range(10000)])
        frac = np.mean(perms[:, 0] == 0)
        assert 0.45 <= frac <= 0.55
        # both splits are mirror images, so every replica equals the statistic
        res = mcar_test(ds, McarConfig(alpha=0.0, n_bootstrap=200), KernelSpec(1.0))
        assert np.all(res.replicas == res.statistic)
        assert res.p_value == 1.0


def test_permutation_pvalue_matches_enumeration():
    ds = from_arrays(np.empty(0), np.empty(0), [0.0, 0.3], [1.0, 2.5])
    spec = KernelSpec(1.0)
    pooled = np.r_[ds.x1_only[:, 0], ds.x2_only[:, 0]]
    T = mmd_two_sample(pooled[:2], pooled[2:], spec)
    exceed = []
    for g in itertools.combinations(range(4), 2):
        rest = [i for i in range(4) if i not in g]
        exceed.append(mmd_two_sample(pooled[list(g)], pooled[rest], spec) >= T - 1e-15)
    exact = np.mean(exceed)
    B = 4000
    res = mcar_test(ds, McarConfig(alpha=0.0, n_bootstrap=B, seed=3), spec)
    lo, hi = binom.ppf([0.005, 0.995], B, exact) / B
    assert lo <= res.p_value <= hi


class TestMcarTest:
    def test_pvalue_grid_and_length(self):
        res = mcar_test(scalar_ds(), McarConfig(n_bootstrap=50, seed=1))
        assert res.replicas.size == 50
        assert res.p_value * 50 == round(res.p_value * 50)
        assert res.p_value == np.mean(res.replicas >= res.statistic)

    def test_plus_one(self):
        res = mcar_test(scalar_ds(shift=3.0), McarConfig(n_bootstrap=50, plus_one=True))
        hits = np.count_nonzero(res.replicas >= res.statistic)
        assert res.p_value == (1 + hits) / 51

    def test_constant_data(self):
        ds = from_arrays(np.full(4, 2.0), np.full(4, 2.0), np.full(3, 2.0), np.full(2, 2.0))
        res = mcar_test(ds, McarConfig(n_bootstrap=30), KernelSpec(1.0))
        assert res.statistic == 0.0 and res.p_value == 1.0

    def test_reproducible_across_threads(self):
        ds = scalar_ds()
        a = mcar_test(ds, McarConfig(n_bootstrap=300, seed=11, threads=1))
        b = mcar_test(ds, McarConfig(n_bootstrap=300, seed=11, threads=4))
        np.testing.assert_array_equal(a.replicas, b.replicas)
        assert a.p_value == b.p_value
        c = mcar_test(ds, McarConfig(n_bootstrap=300, seed=12))
        assert not np.array_equal(a.replicas, c.replicas)

    def test_replica_streams(self):
        # replica b depends only on (seed, b)
        ds = scalar_ds()
        res = mcar_test(ds, McarConfig(n_bootstrap=70, seed=5))
        alpha = default_alpha(ds)
        spec = KernelSpec(res.bandwidth)
        for b in (0, 63, 64, 69):
            rep = mcar_bootstrap_replica(ds, spec, alpha, replica_rng(5, b))
            assert rep == res.replicas[b]

    def test_rejects_shift(self):
        res = mcar_test(scalar_ds(20, 20, 20, shift=2.0), McarConfig(n_bootstrap=200))
        assert res.rejects(0.05)

    @pytest.mark.parametrize("kw", [dict(n_bootstrap=0), dict(l_param=-1.0), dict(threads=0)])
    def test_bad_config(self, kw):
        with pytest.raises(PairMMDError):
            McarConfig(**kw)

    def test_alpha_one_no_incomplete(self):
        ds = from_arrays(*np.random.default_rng(3).normal(size=(2, 9)))
        res = mcar_test(ds, McarConfig(n_bootstrap=20))
        assert res.statistic == mmd_paired(ds.x1_complete, ds.x2_complete,
                                           KernelSpec(res.bandwidth))


def test_p_value_ties():
    assert p_value(1.0, np.array([1.0, 0.5, 2.0, 0.0])) == 0.5
    assert p_value(0.0, np.zeros(7)) == 1.0


def test_null_calibration_small_samples():
    rng = np.random.default_rng(2024)
    reps, hits = 200, 0
    for r in range(reps):
        n = 12
        ds = from_arrays(rng.normal(size=n), rng.normal(size=n), rng.normal(size=n),
                         rng.normal(size=n))
        res = mcar_test(ds, McarConfig(n_bootstrap=99, seed=r))
        hits += res.p_value <= 0.05
    upper = binom.ppf(0.995, reps, 0.05) / reps
    assert hits / reps <= upper


def test_power_nondecreasing_in_n():
    rates = []
    for n in (30, 60, 120):
        rng = np.random.default_rng(n)
        reps, hits = 40, 0
        for r in range(reps):
            z = rng.normal(size=n)
            ds = from_arrays(z + rng.normal(size=n), z + rng.normal(size=n) + 0.5,
                             rng.normal(size=n), rng.normal(size=n) + 0.5)
            hits += mcar_test(ds, McarConfig(n_bootstrap=100, seed=r)).p_value <= 0.05
        rates.append(hits / reps)
    assert rates[0] <= rates[1] + 0.05 and rates[1] <= rates[2] + 0.05
    assert rates[2] > 0.8


class TestMar:
    def test_uniform_weights_reduce_to_paired(self):
        ds = scalar_ds(7, 0, 0)
        spec = KernelSpec(1.2)
        w = np.full(7, 1 / 7)
        assert mar_statistic(ds, w, spec) == pytest.approx(
            mmd_paired(ds.x1_complete, ds.x2_complete, spec), abs=1e-15)

    def test_statistic_matches_weighted(self):
        ds = scalar_ds(6, 4, 0)
        spec = KernelSpec(0.8)
        w = np.random.default_rng(0).uniform(size=6)
        assert mar_statistic(ds, w, spec) == mmd_weighted(ds.x1_complete, ds.x2_complete, w, spec)

    def test_constant_data(self):
        ds = from_arrays(np.full(5, 1.0), np.full(5, 1.0), np.full(3, 1.0))
        res = mar_test(ds, MarConfig(n_bootstrap=40), KernelSpec(1.0),
                       weights=ipw_from_probabilities([1] * 5 + [0] * 3, np.full(8, 0.6)))
        assert res.statistic == 0.0 and res.p_value == 1.0

    def test_estimated_weights_and_threads(self):
        rng = np.random.default_rng(4)
        cov = rng.normal(size=(30, 1))
        x1 = rng.normal(size=30)
        ds = from_arrays(x1[:18], x1[:18] + rng.normal(size=18) * 0.3, x1[18:],
                         covariates=cov, covariate_names=["age"])
        a = mar_test(ds, MarConfig(n_bootstrap=150, seed=2, threads=1))
        b = mar_test(ds, MarConfig(n_bootstrap=150, seed=2, threads=3))
        np.testing.assert_array_equal(a.replicas, b.replicas)
        assert a.extras["logistic_coef"].shape == (2,)
        assert a.extras["weights"].size == 18
        assert a.counts == (18, 12, 0)

    def test_replica_formula(self):
        ds = scalar_ds(6, 3, 0)
        w = ipw_from_probabilities([1] * 6 + [0] * 3, np.linspace(0.3, 0.9, 9))
        res = mar_test(ds, MarConfig(n_bootstrap=5, seed=9), weights=w)
        spec = KernelSpec(res.bandwidth)
        for b in range(5):
            mult = wild_weights(6, res.l_param, replica_rng(9, b))
            ref = oracles.mmd_weighted(ds.x1_complete, ds.x2_complete, mult * w.complete,
                                       lambda x, y: oracles.k_gauss(x, y, spec.bandwidth))
            assert res.replicas[b] == pytest.approx(ref, rel=1e-10, abs=1e-14)

    def test_needs_two_pairs(self):
        ds = from_arrays([1.0], [2.0], [0.5, 0.7])
        with pytest.raises(PairMMDError):
            mar_test(ds)

    def test_no_missing_uses_unit_probability(self):
        ds = scalar_ds(6, 0, 0)
        res = mar_test(ds, MarConfig(n_bootstrap=10))
        np.testing.assert_allclose(res.extras["weights"], 1 / 6)
