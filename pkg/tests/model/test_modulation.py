"""Tests for 16-QAM mapping."""

import numpy as np
import pytest

from fiber_nlc.core.errors import LengthError
from fiber_nlc.model.modulation import (
    labels_to_bits,
    nearest_labels,
    qam16_constellation,
    qam16_demap,
    qam16_map,
    random_bits,
)


class TestConstellation:
    def test_unit_energy(self):
        points = qam16_constellation().points
        assert np.mean(np.abs(points) ** 2) == pytest.approx(1.0)

    def test_gray_labeling(self):
        """Nearest neighbours differ in exactly one bit."""
        constellation = qam16_constellation()
        d_min = constellation.min_distance
        assert d_min == pytest.approx(2 * np.sqrt(0.1))

        for a, pa in enumerate(constellation.points):
            for b, pb in enumerate(constellation.points):
                if a != b and np.isclose(abs(pa - pb), d_min):
                    assert bin(a ^ b).count("1") == 1

    def test_labeling_map(self):
        labeling = qam16_constellation().labeling
        assert len(labeling) == 16
        assert labeling[(0, 0, 0, 0)] == pytest.approx(np.sqrt(0.1) * (-3 - 3j))


class TestMapping:
    def test_map_known_pattern(self):
        symbols = qam16_map(np.array([1, 0, 1, 1, 0, 0, 0, 0]))
        scale = np.sqrt(0.1)
        np.testing.assert_allclose(symbols, [scale * (3 + 1j), scale * (-3 - 3j)])

    def test_map_wrong_length(self):
        with pytest.raises(LengthError):
            qam16_map(np.array([1, 0, 1]))

    def test_demap_inverts_map(self):
        bits = random_bits(4000, np.random.default_rng(3))
        np.testing.assert_array_equal(qam16_demap(qam16_map(bits)), bits)

    def test_demap_noisy_points(self):
        """Small perturbations keep the decision."""
        points = qam16_constellation().points
        noisy = points + 0.05 * (1 + 1j)
        np.testing.assert_array_equal(nearest_labels(noisy), np.arange(16))

    def test_labels_to_bits(self):
        np.testing.assert_array_equal(labels_to_bits(np.array([5, 10])), [0, 1, 0, 1, 1, 0, 1, 0])

    def test_random_bits(self):
        bits = random_bits(10000, np.random.default_rng(1))
        assert set(np.unique(bits)) <= {0, 1}
        assert abs(bits.mean() - 0.5) < 0.03
        np.testing.assert_array_equal(bits, random_bits(10000, np.random.default_rng(1)))
