"""Tests for synthetic nested-block panels."""

import numpy as np
import pytest

from block_canon.errors import InputError
from block_canon.matrix_functions import is_valid_correlation
from block_canon.simulate import (
    nested_correlation,
    nested_labels,
    sample_standardized,
    simulate_panel,
)


class TestNestedLabels:
    def test_full_tree(self):
        labels = nested_labels((4, 3), 5)
        assert len(labels) == 60
        assert labels[0] == "01.01"
        assert labels[-1] == "04.03"
        assert labels.count("02.02") == 5

    def test_bad_shape(self):
        with pytest.raises(InputError):
            nested_labels((2, 0), 3)


class TestNestedCorrelation:
    def test_two_levels(self):
        C = nested_correlation(nested_labels((4, 3), 5), (0.2, 0.3))
        assert C.partition.sizes == (15, 15, 15, 15)
        np.testing.assert_allclose(np.diag(C.rho), 0.5)
        assert C.rho[0, 1] == pytest.approx(0.2)

    def test_three_levels(self):
        C = nested_correlation(nested_labels((2, 2), 3), (0.1, 0.2, 0.3))
        assert C.partition.K == 4
        assert C.rho[0, 0] == pytest.approx(0.6)
        assert C.rho[0, 1] == pytest.approx(0.3)
        assert C.rho[0, 2] == pytest.approx(0.1)
        assert is_valid_correlation(C).is_valid

    @pytest.mark.parametrize("weights", [(), (0.5, 0.6), (-0.1, 0.2)])
    def test_bad_weights(self, weights):
        with pytest.raises(InputError):
            nested_correlation(nested_labels((2,), 2), weights)


class TestSampling:
    def test_empirical_correlation(self):
        C = nested_correlation(nested_labels((2, 2), 3), (0.1, 0.2, 0.3))
        X = sample_standardized(C, 40_000, np.random.default_rng(0))
        assert X.shape == (40_000, 12)
        np.testing.assert_allclose(np.corrcoef(X, rowvar=False), C.expand(), atol=0.03)

    def test_panel_layout(self):
        sim = simulate_panel((2, 2), 3, (0.1, 0.3), N=20, seed=3)
        assert sim.panel.X.shape == (20, 12)
        assert sim.panel.dates[0] == "2008-01-02"
        assert sim.panel.dates[1] == "2008-01-03"
        assert sorted(sim.panel.asset_ids) == [f"A{i:05d}" for i in range(12)]
        assert set(sim.groups.labels) == set(sim.panel.asset_ids)
        assert sim.level == 1
        assert np.all((sim.variances >= 1e-4) & (sim.variances <= 9e-4))

    def test_reproducible(self):
        a = simulate_panel((2,), 4, (0.2, 0.3), N=10, seed=5)
        b = simulate_panel((2,), 4, (0.2, 0.3), N=10, seed=5)
        assert a.panel.asset_ids == b.panel.asset_ids
        np.testing.assert_array_equal(a.panel.X, b.panel.X)

    def test_unshuffled(self):
        sim = simulate_panel((2,), 2, (0.2, 0.3), N=5, shuffle=False)
        assert sim.panel.asset_ids == ("A00000", "A00001", "A00002", "A00003")

    def test_needs_observations(self):
        with pytest.raises(InputError):
            simulate_panel((2,), 2, (0.2, 0.3), N=0)
