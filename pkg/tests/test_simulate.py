"""Synthetic data generator: transform, determinism, scrambling, block means."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clbm.metrics import adjusted_rand_index
from clbm.simulate import SimSpec, generate, transform_theta


class TestTransform:
    def test_endpoints(self):
        assert transform_theta(0.0, 0.2, 0.8) == pytest.approx(0.2)
        assert transform_theta(1.0, 0.3, 0.7) == pytest.approx(0.7)

    def test_midpoint_fixed_point(self):
        assert transform_theta(0.5, 0.2, 0.8) == pytest.approx(0.5)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            transform_theta(1.5, 0.0, 1.0)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
    def test_stays_inside_target_interval(self, theta, a, b):
        low, high = min(a, b), max(a, b)
        out = float(transform_theta(theta, low, high))
        assert low - 1e-12 <= out <= high + 1e-12


class TestSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            SimSpec(n=5, m=5, k=6, g=2)
        with pytest.raises(ValueError):
            SimSpec(n=5, m=5, k=2, g=2, theta_low=0.8, theta_high=0.2)
        with pytest.raises(ValueError):
            SimSpec(n=5, m=5, k=2, g=2, theta_high=1.5)

    def test_degenerate_interval_allowed(self):
        spec = SimSpec(n=30, m=30, k=2, g=2, theta_low=0.5, theta_high=0.5, seed=1)
        result = generate(spec)
        assert np.all(result.theta == 0.5)


class TestGenerate:
    def test_deterministic_given_seed(self):
        spec = SimSpec(n=20, m=15, k=3, g=2, seed=7)
        a = generate(spec)
        b = generate(spec)
        assert np.array_equal(a.data.values, b.data.values)
        assert np.array_equal(a.row_labels, b.row_labels)

    def test_scramble_preserves_cells_and_structure(self):
        spec_plain = SimSpec(n=18, m=14, k=3, g=2, seed=3, scramble=False)
        spec_scr = SimSpec(n=18, m=14, k=3, g=2, seed=3, scramble=True)
        plain = generate(spec_plain)
        scrambled = generate(spec_scr)
        # same multiset of cell values
        assert plain.data.values.sum() == scrambled.data.values.sum()
        assert sorted(plain.data.values.ravel()) == sorted(scrambled.data.values.ravel())
        # cluster sizes preserved up to permutation
        assert sorted(np.bincount(plain.row_labels)) == sorted(np.bincount(scrambled.row_labels))
        # ground truth stays aligned: per-block means identical
        for res in (plain, scrambled):
            for k in range(3):
                for g in range(2):
                    cells = res.data.values[np.ix_(res.row_labels == k, res.col_labels == g)]
                    plain_cells = plain.data.values[np.ix_(plain.row_labels == k,
                                                           plain.col_labels == g)]
                    assert cells.sum() == plain_cells.sum()

    def test_unscrambled_labels_are_bands(self):
        res = generate(SimSpec(n=10, m=9, k=3, g=3, seed=0, scramble=False))
        assert res.row_labels.tolist() == [0, 0, 0, 0, 1, 1, 1, 2, 2, 2]
        assert res.col_labels.tolist() == [0, 0, 0, 1, 1, 1, 2, 2, 2]

    def test_block_means_obey_law_of_large_numbers(self):
        res = generate(SimSpec(n=100, m=100, k=2, g=2, seed=11))
        for k in range(2):
            for g in range(2):
                cells = res.data.values[np.ix_(res.row_labels == k, res.col_labels == g)]
                assert cells.mean() == pytest.approx(res.theta[k, g], abs=0.1)

    def test_degenerate_interval_has_no_recoverable_structure(self):
        res = generate(SimSpec(n=60, m=60, k=3, g=3, theta_low=0.5, theta_high=0.5, seed=5))
        # any clustering is as good as any other; spot-check independence from truth
        rng = np.random.default_rng(0)
        ari = adjusted_rand_index(res.row_labels, rng.permutation(res.row_labels))
        assert abs(ari) < 0.2
