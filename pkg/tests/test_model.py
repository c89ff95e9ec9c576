"""Collapsed posterior, allocation state and single-item moves."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clbm.model import (AllocationState, DataMatrix, Hyperparams,
                        log_cluster_count_prior, log_posterior)
from oracles import flog, rat_posterior


def binary_data(n=5, m=4, seed=0):
    rng = np.random.default_rng(seed)
    return DataMatrix((rng.random((n, m)) < 0.5).astype(float), "bernoulli")


def gaussian_data(n=5, m=4, seed=0):
    rng = np.random.default_rng(seed)
    return DataMatrix(rng.normal(0, 1, (n, m)), "gaussian")


def random_state(data, hp, k, g, seed):
    rng = np.random.default_rng(seed)
    z = rng.integers(0, k, data.n)
    w = rng.integers(0, g, data.m)
    return AllocationState(data, hp, z, w, k, g)


class TestValidation:
    def test_data_matrix_rejects_bad_cells(self):
        with pytest.raises(ValueError):
            DataMatrix([[0.0, 2.0]], "bernoulli")
        with pytest.raises(ValueError):
            DataMatrix([[np.nan]], "gaussian")
        with pytest.raises(ValueError):
            DataMatrix(np.zeros((0, 3)), "bernoulli")
        with pytest.raises(ValueError):
            DataMatrix([[0.0]], "poisson")

    def test_hyperparams_positivity(self):
        for bad in (dict(alpha=0.0), dict(beta=-1.0), dict(gamma=0.0),
                    dict(delta=0.0), dict(tau2=0.0), dict(k_max=0)):
            with pytest.raises(ValueError):
                Hyperparams(**bad)

    def test_defaults_follow_variant(self):
        hb = Hyperparams.for_variant("bernoulli")
        assert (hb.alpha, hb.beta, hb.gamma, hb.delta) == (1.0, 1.0, 1.0, 1.0)
        hg = Hyperparams.for_variant("gaussian")
        assert (hg.gamma, hg.delta, hg.xi, hg.tau2) == (0.02, 0.02, 0.0, 100.0)

    def test_resolve_truncation_bounds(self):
        hp = Hyperparams().resolve(7, 200)
        assert (hp.k_max, hp.g_max) == (7, 50)

    def test_state_rejects_out_of_range_labels(self):
        data = binary_data()
        hp = Hyperparams.for_variant("bernoulli")
        with pytest.raises(ValueError):
            AllocationState(data, hp, [0, 0, 0, 0, 3], [0] * 4, 2, 1)

    def test_log_posterior_respects_truncation(self):
        data = binary_data()
        hp = Hyperparams.for_variant("bernoulli", k_max=2, g_max=2)
        with pytest.raises(ValueError):
            AllocationState(data, hp, [0, 1, 2, 0, 1], [0] * 4, 3, 1)


class TestPriorAndPosterior:
    def test_prior_ratio_identity(self):
        for k in range(1, 30):
            ratio = math.exp(log_cluster_count_prior(k + 1) - log_cluster_count_prior(k))
            assert ratio == pytest.approx(1.0 / (k + 1), rel=1e-12)

    def test_single_component_case(self):
        # with K = G = 1 the Dirichlet terms cancel exactly
        data = binary_data()
        hp = Hyperparams.for_variant("bernoulli").resolve(data.n, data.m)
        st_ = AllocationState.single_cluster(data, hp)
        from clbm.model import BlockStats, log_marginal_bernoulli
        m11 = log_marginal_bernoulli(
            BlockStats(data.n * data.m, float(data.values.sum())), hp.gamma, hp.delta)
        want = 2 * log_cluster_count_prior(1) + m11
        assert log_posterior(st_) == pytest.approx(want, abs=1e-10)

    def test_label_permutation_invariance(self):
        data = binary_data(6, 5, seed=3)
        hp = Hyperparams.for_variant("bernoulli")
        z = np.array([0, 1, 2, 0, 1, 2])
        w = np.array([0, 1, 0, 1, 1])
        base = log_posterior(AllocationState(data, hp, z, w, 3, 2))
        perm = np.array([2, 0, 1])
        permuted = log_posterior(AllocationState(data, hp, perm[z], w, 3, 2))
        assert permuted == base

    def test_exact_rational_oracle_binary(self):
        data = binary_data(3, 3, seed=11)
        hp = Hyperparams.for_variant("bernoulli")
        z = [0, 1, 0]
        w = [1, 0, 0]
        got = log_posterior(AllocationState(data, hp, z, w, 2, 2))
        want = flog(rat_posterior(data.values, z, w, 2, 2))
        assert got == pytest.approx(want, abs=1e-10)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 3), st.integers(1, 3))
    def test_exact_rational_oracle_randomized(self, seed, k, g):
        data = binary_data(4, 3, seed=seed)
        hp = Hyperparams.for_variant("bernoulli")
        rng = np.random.default_rng(seed + 1)
        z = rng.integers(0, k, 4)
        w = rng.integers(0, g, 3)
        got = log_posterior(AllocationState(data, hp, z, w, k, g))
        want = flog(rat_posterior(data.values, z, w, k, g))
        assert got == pytest.approx(want, abs=1e-9)


class TestMoves:
    def test_identity_move_is_exact_noop(self):
        data = binary_data()
        hp = Hyperparams.for_variant("bernoulli")
        st_ = random_state(data, hp, 2, 2, seed=4)
        snap = st_.z
        assert st_.apply_row_move(1, int(snap[1])) == 0.0
        assert np.array_equal(st_.z, snap)

    @pytest.mark.parametrize("maker,variant_tol", [(binary_data, 1e-9), (gaussian_data, 1e-9)])
    def test_delta_matches_full_recomputation(self, maker, variant_tol):
        data = maker(6, 5, seed=9)
        hp = Hyperparams.for_variant(data.variant)
        st_ = random_state(data, hp, 3, 2, seed=10)
        rng = np.random.default_rng(17)
        for _ in range(40):
            if rng.random() < 0.5:
                i = int(rng.integers(data.n))
                k_to = int(rng.integers(st_.K))
                before = log_posterior(st_)
                delta = st_.apply_row_move(i, k_to)
            else:
                j = int(rng.integers(data.m))
                g_to = int(rng.integers(st_.G))
                before = log_posterior(st_)
                delta = st_.apply_column_move(j, g_to)
            assert delta == pytest.approx(log_posterior(st_) - before, abs=variant_tol)

    def test_apply_then_inverse_restores_binary_exactly(self):
        data = binary_data(6, 5, seed=2)
        hp = Hyperparams.for_variant("bernoulli")
        st_ = random_state(data, hp, 3, 2, seed=5)
        snap_S = st_._S.copy()
        snap_agg = st_._colAgg.copy()
        k_from = int(st_.z[2])
        st_.apply_row_move(2, (k_from + 1) % st_.K)
        st_.apply_row_move(2, k_from)
        assert np.array_equal(st_._S, snap_S)
        assert np.array_equal(st_._colAgg, snap_agg)

    def test_emptying_a_cluster_leaves_unit_marginals(self):
        data = binary_data(3, 3, seed=6)
        hp = Hyperparams.for_variant("bernoulli")
        st_ = AllocationState(data, hp, [0, 1, 1], [0, 0, 1], 2, 2)
        st_.apply_row_move(0, 1)
        assert st_.n_k[0] == 0
        from clbm.model import log_marginal_bernoulli
        for g in range(st_.G):
            assert st_.block_stats(0, g).count == 0
            assert log_marginal_bernoulli(st_.block_stats(0, g), hp.gamma, hp.delta) == 0.0

    @pytest.mark.parametrize("maker,tol", [(binary_data, 0.0), (gaussian_data, 1e-9)])
    def test_incremental_matches_batch_after_many_moves(self, maker, tol):
        data = maker(8, 7, seed=21)
        hp = Hyperparams.for_variant(data.variant, k_max=4, g_max=4)
        st_ = random_state(data, hp, 4, 4, seed=22)
        rng = np.random.default_rng(23)
        for _ in range(10_000):
            if rng.random() < 0.5:
                st_.apply_row_move(int(rng.integers(data.n)), int(rng.integers(st_.K)))
            else:
                st_.apply_column_move(int(rng.integers(data.m)), int(rng.integers(st_.G)))
        assert st_.max_cache_deviation() <= tol


class TestBlockStats:
    def test_cauchy_schwarz_on_live_state(self):
        data = gaussian_data(6, 6, seed=30)
        hp = Hyperparams.for_variant("gaussian")
        st_ = random_state(data, hp, 3, 3, seed=31)
        for k in range(st_.K):
            for g in range(st_.G):
                bs = st_.block_stats(k, g)
                if bs.count > 0:
                    assert bs.ss >= bs.s ** 2 / bs.count - 1e-9

    def test_binary_sums_are_integers_in_range(self):
        data = binary_data(7, 6, seed=32)
        hp = Hyperparams.for_variant("bernoulli")
        st_ = random_state(data, hp, 3, 2, seed=33)
        for k in range(st_.K):
            for g in range(st_.G):
                bs = st_.block_stats(k, g)
                assert bs.s == int(bs.s)
                assert 0 <= bs.s <= bs.count
