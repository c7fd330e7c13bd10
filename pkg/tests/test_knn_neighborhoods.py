"""Unit tests for k-NN neighborhoods and radius envelopes."""

import math
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from core.errors import NeighborhoodError
from core.knn_neighborhoods import (knn_radius, neighborhood, radius_envelopes, radius_grid, region_grid,
                                    subgroup_radius)
from core.sbm_core import ModelConfig, Region


class TestKnnRadius(unittest.TestCase):
    """Test cases for knn_radius and neighborhood."""

    def setUp(self):
        """Set up test fixtures."""
        self.X = np.arange(5, dtype=float)[:, None]

    def test_members_and_radius(self):
        """Three nearest points of 2 in {0,...,4} are 1, 2, 3 at radius 1."""
        result = knn_radius(self.X, [2.0], 3)
        np.testing.assert_array_equal(result.members, [1, 2, 3])
        self.assertEqual(result.radius, 1.0)

    def test_equal_distances_prefer_lower_index(self):
        """With a tie the lower node index joins the neighborhood."""
        result = knn_radius(np.array([[0.0], [2.0]]), [1.0], 1)
        np.testing.assert_array_equal(result.members, [0])
        self.assertEqual(result.radius, 1.0)

    def test_k_equal_to_N_takes_everyone(self):
        """k = N returns every node and the largest distance."""
        result = knn_radius(self.X, [0.0], 5)
        np.testing.assert_array_equal(result.members, np.arange(5))
        self.assertEqual(result.radius, 4.0)

    def test_invalid_k(self):
        """k outside [1, N] is rejected."""
        for k in (0, 6):
            with self.assertRaises(NeighborhoodError):
                knn_radius(self.X, [0.0], k)

    def test_dimension_mismatch(self):
        """A query of the wrong dimension is rejected."""
        with self.assertRaises(NeighborhoodError):
            knn_radius(self.X, [0.0, 1.0], 2)

    def test_group_counts(self):
        """Known labels give n_h(x)."""
        g = np.array([0, 1, 1, 0, 1])
        result = neighborhood(self.X, [2.0], 3, g, 2)
        np.testing.assert_array_equal(result.group_counts, [1, 2])
        self.assertEqual(result.as_dict()['group_counts'], [1, 2])

    def test_subgroup_radius(self):
        """r_l^h only looks at community h."""
        g = np.array([0, 1, 1, 0, 1])
        self.assertEqual(subgroup_radius(self.X, g, 0, [2.0], 1), 1.0)
        self.assertEqual(subgroup_radius(self.X, g, 0, [2.0], 2), 2.0)
        with self.assertRaises(NeighborhoodError):
            subgroup_radius(self.X, g, 0, [2.0], 3)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(min_value=5, max_value=60), st.integers(min_value=0, max_value=10_000),
           st.floats(min_value=0.0, max_value=1.0))
    def test_ball_contains_exactly_the_members(self, N, seed, query):
        """Members lie inside the radius and at least k points lie within it."""
        X = np.random.default_rng(seed).random((N, 2))
        k = max(1, N // 3)
        result = knn_radius(X, [query, 1.0 - query], k)
        dist = np.linalg.norm(X - np.array([query, 1.0 - query]), axis=1)
        self.assertEqual(result.members.size, k)
        self.assertTrue(np.all(dist[result.members] <= result.radius))
        self.assertGreaterEqual(int(np.sum(dist <= result.radius)), k)
        self.assertTrue(np.all(np.diff(result.members) > 0))


class TestGrids(unittest.TestCase):
    """Test cases for region grids and radius grids."""

    def test_grid_includes_corners(self):
        """A 3-point grid on [0,1]^2 has 9 points with both corners."""
        grid = region_grid(Region.unit_cube(2), 3)
        self.assertEqual(grid.shape, (9, 2))
        self.assertTrue(any(np.array_equal(p, [0.0, 0.0]) for p in grid))
        self.assertTrue(any(np.array_equal(p, [1.0, 1.0]) for p in grid))

    def test_grid_resolution_checked(self):
        """Resolution below 2 is rejected."""
        with self.assertRaises(NeighborhoodError):
            region_grid(Region.unit_cube(1), 1)

    def test_radius_grid_matches_pointwise(self):
        """radius_grid agrees with knn_radius at each grid point."""
        X = np.random.default_rng(4).random((40, 1))
        grid = region_grid(Region.unit_cube(1), 7)
        radii = radius_grid(X, 5, grid)
        for point, radius in zip(grid, radii):
            self.assertAlmostEqual(radius, knn_radius(X, point, 5).radius)


class TestRadiusEnvelopes(unittest.TestCase):
    """Test cases for R_k and underline R_k."""

    def setUp(self):
        """Set up test fixtures."""
        self.spec = ModelConfig.model_validate(
            {'G': 2, 'd': 1, 'field': {'name': 'planted-partition', 'params': {'p': 0.6, 'q': 0.2}}}).build()

    def test_upper_envelope_value(self):
        """R_k = 2k/(N b_X c V_1) = 0.2 for N=1000, k=100 on [0,1]."""
        env = radius_envelopes(self.spec, 1000, 100, 0.1)
        self.assertAlmostEqual(env.R_k, 0.2)

    def test_lower_envelope_undefined_for_small_k(self):
        """k below 12 d ln(12N/delta) leaves underline R_k undefined."""
        env = radius_envelopes(self.spec, 1000, 100, 0.1)
        self.assertIsNone(env.underline_R_k)
        self.assertFalse(env.lower_defined)
        self.assertFalse(env.lower_applicable)

    def test_lower_envelope_value(self):
        """underline R_k = (k - m)/(4 N U_bar V_1) with m = 12 ln(12N/delta)."""
        N, k, delta = 2000, 600, 0.1
        env = radius_envelopes(self.spec, N, k, delta)
        margin = 12.0 * math.log(12.0 * N / delta)
        self.assertAlmostEqual(env.underline_R_k, (k - margin) / (4.0 * N * 2.0))
        self.assertLess(env.underline_R_k, env.R_k)

    def test_delta_checked(self):
        """delta outside (0,1) is rejected."""
        with self.assertRaises(NeighborhoodError):
            radius_envelopes(self.spec, 100, 10, 1.0)


if __name__ == '__main__':
    unittest.main()
