"""Variational EM baseline: objective, monotone ascent, recovery, AIC-3."""

import numpy as np
import pytest
from scipy.special import xlogy

from clbm.bem2 import (FuzzyState, aic3_parameter_count, aic3_score,
                       bem2_criterion, bem2_fit, _init_state)
from clbm.metrics import adjusted_rand_index
from clbm.model import DataMatrix


def noiseless_blocks(n=20, m=12, seed=0):
    y = np.zeros((n, m))
    y[: n // 2, : m // 2] = 1.0
    y[n // 2:, m // 2:] = 1.0
    rng = np.random.default_rng(seed)
    rp, cp = rng.permutation(n), rng.permutation(m)
    truth_rows = (np.arange(n) >= n // 2).astype(int)[rp]
    truth_cols = (np.arange(m) >= m // 2).astype(int)[cp]
    return DataMatrix(y[np.ix_(rp, cp)], "bernoulli"), truth_rows, truth_cols


def direct_criterion(state, data):
    """Four-deep loop evaluation of the objective, sharing nothing with the
    vectorized implementation."""
    n, m = data.n, data.m
    K = state.s.shape[1]
    G = state.t.shape[1]
    total = 0.0
    for i in range(n):
        for k in range(K):
            total += xlogy(state.s[i, k], state.omega[k])
    for j in range(m):
        for g in range(G):
            total += xlogy(state.t[j, g], state.rho[g])
    for i in range(n):
        for j in range(m):
            for k in range(K):
                for g in range(G):
                    if data.variant == "bernoulli":
                        lp = (data.values[i, j] * np.log(state.theta[k, g])
                              + (1 - data.values[i, j]) * np.log1p(-state.theta[k, g]))
                    else:
                        v = state.theta_var[k, g]
                        lp = (-0.5 * np.log(2 * np.pi * v)
                              - (data.values[i, j] - state.theta[k, g]) ** 2 / (2 * v))
                    total += state.s[i, k] * state.t[j, g] * lp
    total -= float(np.sum(xlogy(state.s, state.s)) + np.sum(xlogy(state.t, state.t)))
    return total


class TestCriterion:
    def test_one_hot_memberships_drop_entropy(self):
        data, _, _ = noiseless_blocks()
        s = np.zeros((data.n, 2))
        s[:, 0] = 1.0
        t = np.zeros((data.m, 2))
        t[:, 1] = 1.0
        state = FuzzyState("bernoulli", s, t, np.array([0.5, 0.5]),
                           np.array([0.5, 0.5]), np.full((2, 2), 0.5))
        # entropies vanish, so the criterion equals the complete log likelihood
        n_cells = data.n * data.m
        want = (data.n * np.log(0.5) + data.m * np.log(0.5) + n_cells * np.log(0.5))
        assert bem2_criterion(state, data) == pytest.approx(want, abs=1e-9)

    def test_uniform_memberships_contribute_log_k(self):
        data, _, _ = noiseless_blocks()
        K = 3
        s = np.full((data.n, K), 1.0 / K)
        t = np.zeros((data.m, 1))
        t[:, 0] = 1.0
        state = FuzzyState("bernoulli", s, t, np.full(K, 1.0 / K), np.array([1.0]),
                           np.full((K, 1), 0.5))
        got = bem2_criterion(state, data)
        # row entropy of uniform memberships is n log K
        loglik = (data.n * np.log(1.0 / K) + 0.0
                  + data.n * data.m * np.log(0.5))
        assert got == pytest.approx(loglik + data.n * np.log(K), abs=1e-9)

    @pytest.mark.parametrize("variant", ["bernoulli", "gaussian"])
    def test_matches_direct_summation(self, variant):
        rng = np.random.default_rng(5)
        if variant == "bernoulli":
            data = DataMatrix((rng.random((6, 5)) < 0.4).astype(float), variant)
        else:
            data = DataMatrix(rng.normal(0, 1, (6, 5)), variant)
        state = _init_state(data, 3, 2, rng)
        assert bem2_criterion(state, data) == pytest.approx(
            direct_criterion(state, data), abs=1e-8)


class TestFit:
    def test_monotone_ascent_across_random_inits(self):
        rng = np.random.default_rng(8)
        data = DataMatrix((rng.random((12, 9)) < 0.5).astype(float), "bernoulli")
        for seed in range(20):
            res = bem2_fit(data, 3, 2, seed=seed, n_restarts=1, max_iter=60)
            diffs = np.diff(res.history)
            assert diffs.min() >= -1e-9

    def test_recovers_noiseless_partition(self):
        data, truth_rows, truth_cols = noiseless_blocks()
        res = bem2_fit(data, 2, 2, seed=1)
        assert adjusted_rand_index(res.hard_rows, truth_rows) == 1.0
        assert adjusted_rand_index(res.hard_cols, truth_cols) == 1.0

    def test_single_block_converges_to_global_mean(self):
        data, _, _ = noiseless_blocks()
        res = bem2_fit(data, 1, 1, seed=0, n_restarts=1)
        assert res.state.theta[0, 0] == pytest.approx(data.values.mean(), abs=1e-9)
        assert res.converged

    def test_gaussian_fit_runs_and_ascends(self):
        rng = np.random.default_rng(10)
        mu = np.array([[-2.0, 2.0], [2.0, -2.0]])
        z = np.repeat([0, 1], 10)
        w = np.repeat([0, 1], 6)
        y = rng.normal(mu[np.ix_(z, w)], 0.5)
        data = DataMatrix(y, "gaussian")
        res = bem2_fit(data, 2, 2, seed=0, max_iter=300)
        assert np.diff(res.history).min() >= -1e-9
        assert adjusted_rand_index(res.hard_rows, z) == 1.0

    def test_memberships_stay_on_simplex(self):
        rng = np.random.default_rng(11)
        data = DataMatrix((rng.random((10, 8)) < 0.5).astype(float), "bernoulli")
        res = bem2_fit(data, 3, 3, seed=2, n_restarts=2, max_iter=40)
        assert np.allclose(res.state.s.sum(axis=1), 1.0)
        assert np.allclose(res.state.t.sum(axis=1), 1.0)
        assert res.state.s.min() >= 0 and res.state.t.min() >= 0

    def test_unused_clusters_allowed(self):
        # more clusters than distinct row patterns: some must sit empty
        data, _, _ = noiseless_blocks()
        res = bem2_fit(data, 5, 2, seed=3, n_restarts=5)
        assert len(np.unique(res.hard_rows)) <= 5  # simply must not error

    def test_bad_counts_rejected(self):
        data, _, _ = noiseless_blocks()
        with pytest.raises(ValueError):
            bem2_fit(data, 0, 2)
        with pytest.raises(ValueError):
            bem2_fit(data, 2, data.m + 1)


class TestAIC3:
    def test_frozen_count_small(self):
        assert aic3_parameter_count(10, 10, 2, 2, 1) == 26

    def test_single_block_count_is_d(self):
        assert aic3_parameter_count(10, 10, 1, 1, 1) == 1
        assert aic3_parameter_count(10, 10, 1, 1, 2) == 2

    def test_frozen_count_large(self):
        assert aic3_parameter_count(435, 16, 7, 12, 1) == 2887

    def test_score_uses_hard_assignments(self):
        data, truth_rows, truth_cols = noiseless_blocks()
        res = bem2_fit(data, 2, 2, seed=1)
        score = aic3_score(data, res.hard_rows, res.hard_cols, 2, 2)
        # noiseless data: the data term of the complete log likelihood is ~0
        # at the true partition, leaving only the mixing-weight terms
        weight_term = data.n * np.log(0.5) + data.m * np.log(0.5)
        want = -2.0 * weight_term + 3 * aic3_parameter_count(20, 12, 2, 2, 1)
        assert score == pytest.approx(want, rel=1e-6)
