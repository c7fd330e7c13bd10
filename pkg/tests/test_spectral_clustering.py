"""Unit tests for spectral decomposition, K-means and perturbation checks."""

import math
import unittest

import numpy as np
import scipy.linalg
import scipy.stats

from core.errors import ClusteringError
from core.estimators import align_to_truth
from core.localized_laplacian import population_factorization, population_laplacians
from core.sbm_core import ModelConfig, Network
from core.spectral_clustering import (ClusteringConfig, cluster_neighborhoods, davis_kahan_check, kmeans_rows,
                                      misclustering_sets, procrustes_rotation, top_svd)
from utils.helpers import membership_matrix


def population_L(g, G):
    spec = ModelConfig.model_validate(
        {'G': G, 'd': 1, 'field': {'name': 'planted-partition', 'params': {'p': 0.6, 'q': 0.2}}}).build()
    N = len(g)
    network = Network(X=np.linspace(0, 1, N)[:, None], A=np.zeros((N, N), dtype=np.uint8), g=g, G=G)
    eta = np.arange(N)
    return population_laplacians(spec, network, eta, eta, [0.4], [0.6], 1.0)


class TestTopSvd(unittest.TestCase):
    """Test cases for the top-G singular decomposition."""

    def setUp(self):
        """Set up test fixtures."""
        self.L = np.random.default_rng(0).random((8, 6))

    def test_sign_convention(self):
        """The first clearly nonzero entry of every U column is positive."""
        decomposition = top_svd(-self.L, 3)
        for j in range(3):
            column = decomposition.U[:, j]
            first = column[np.flatnonzero(np.abs(column) > 1e-12)[0]]
            self.assertGreater(first, 0)

    def test_reconstructs_rank_G_part(self):
        """U diag(sigma) V^T matches the truncated SVD."""
        decomposition = top_svd(self.L, 2)
        U, s, Vt = np.linalg.svd(self.L)
        expected = (U[:, :2] * s[:2]) @ Vt[:2]
        actual = (decomposition.U * decomposition.sigma) @ decomposition.V.T
        np.testing.assert_allclose(actual, expected, atol=1e-10)
        self.assertAlmostEqual(decomposition.eigengap, s[1] - s[2])

    def test_rank_deficiency_flagged(self):
        """A rank-one matrix has sigma_2 = 0."""
        L = np.outer(np.ones(5), np.arange(1.0, 5.0))
        self.assertTrue(top_svd(L, 2).rank_deficient)
        self.assertFalse(top_svd(L, 1).rank_deficient)

    def test_G_too_large(self):
        """G above min(k, k) is rejected."""
        with self.assertRaises(ClusteringError):
            top_svd(self.L, 7)


class TestKMeans(unittest.TestCase):
    """Test cases for Lloyd K-means with restarts."""

    def setUp(self):
        """Set up test fixtures."""
        rng = np.random.default_rng(1)
        self.M = np.vstack([rng.normal(0.0, 0.05, (15, 2)), rng.normal(3.0, 0.05, (10, 2))])
        self.truth = np.array([0] * 15 + [1] * 10)

    def test_separated_blobs(self):
        """Well-separated blobs are recovered."""
        result = kmeans_rows(self.M, ClusteringConfig(G=2, restarts=4, seed=3))
        alignment = align_to_truth(result.membership, membership_matrix(self.truth, 2))
        self.assertEqual(alignment.measure, 0.0)
        self.assertEqual(len(result.objectives), 4)
        self.assertAlmostEqual(result.objective, min(result.objectives))
        self.assertGreaterEqual(result.within_epsilon, 1)

    def test_deterministic_given_seed(self):
        """Equal seeds give equal labels and objectives."""
        config = ClusteringConfig(G=3, restarts=5, seed=9, replication=2)
        first = kmeans_rows(self.M, config)
        second = kmeans_rows(self.M, config)
        np.testing.assert_array_equal(first.labels, second.labels)
        self.assertEqual(first.objectives, second.objectives)

    def test_threaded_restarts_match_serial(self):
        """Restarts on worker threads give the same winner and objectives."""
        serial = kmeans_rows(self.M, ClusteringConfig(G=3, restarts=6, seed=4))
        threaded = kmeans_rows(self.M, ClusteringConfig(G=3, restarts=6, seed=4, workers=3))
        np.testing.assert_array_equal(serial.labels, threaded.labels)
        self.assertEqual(serial.objectives, threaded.objectives)
        self.assertEqual(serial.best_restart, threaded.best_restart)

    def test_too_few_rows(self):
        """Fewer rows than clusters is an error."""
        with self.assertRaises(ClusteringError):
            kmeans_rows(self.M[:1], ClusteringConfig(G=2))


class TestPopulationRecovery(unittest.TestCase):
    """Clustering the population Laplacian recovers the communities exactly."""

    def test_two_communities(self):
        """G = 2 with unequal sizes."""
        g = np.array([0] * 12 + [1] * 8)
        pop = population_L(g, 2)
        result = cluster_neighborhoods(pop.L_xx, ClusteringConfig(G=2, restarts=3))
        self.assertEqual(align_to_truth(result.Theta_hat_x, membership_matrix(g, 2)).measure, 0.0)
        self.assertEqual(align_to_truth(result.Theta_hat_xp, membership_matrix(g, 2)).measure, 0.0)

    def test_three_communities(self):
        """G = 3 with interleaved labels."""
        g = np.array([0, 1, 2] * 6 + [0, 1])
        pop = population_L(g, 3)
        result = cluster_neighborhoods(pop.L_xx, ClusteringConfig(G=3, restarts=3))
        self.assertEqual(align_to_truth(result.Theta_hat_x, membership_matrix(g, 3)).measure, 0.0)


class TestPerturbationChecks(unittest.TestCase):
    """Test cases for Procrustes, Davis-Kahan and misclustering sets."""

    def setUp(self):
        """Set up test fixtures."""
        self.U_pop, _ = np.linalg.qr(np.random.default_rng(5).normal(size=(12, 2)))
        self.Q = scipy.stats.ortho_group.rvs(2, random_state=6)

    def test_procrustes_recovers_rotation(self):
        """U = U_pop Q gives back Q."""
        Q = procrustes_rotation(self.U_pop @ self.Q, self.U_pop)
        np.testing.assert_allclose(Q, self.Q, atol=1e-10)

    def test_davis_kahan_sides(self):
        """lhs is the Frobenius distance and rhs = 4 sqrt(2G) dev / lambda_G."""
        U = self.U_pop @ self.Q + 0.01
        check = davis_kahan_check(U, self.U_pop, lambda_G=0.5, deviation=0.1)
        self.assertAlmostEqual(check.rhs, 4.0 * math.sqrt(4.0) * 0.1 / 0.5)
        self.assertLessEqual(check.lhs, np.linalg.norm(U - self.U_pop @ self.Q) + 1e-12)
        self.assertTrue(check.holds)

    def test_davis_kahan_zero_gap(self):
        """lambda_G = 0 gives an infinite right-hand side."""
        check = davis_kahan_check(self.U_pop, self.U_pop, lambda_G=0.0, deviation=0.1)
        self.assertEqual(check.rhs, math.inf)
        self.assertTrue(check.holds)

    def test_misclustering_empty_on_population(self):
        """Population singular vectors and exact centroids give empty sets."""
        g = np.array([0] * 6 + [1] * 4)
        pop = population_L(g, 2)
        factorization = population_factorization(pop)
        U_pop = factorization.Theta_x @ factorization.Z_U
        Q = scipy.linalg.orthogonal_procrustes(U_pop, U_pop)[0]
        centroids = factorization.Z_U
        report = misclustering_sets(g, centroids, U_pop, U_pop, Q, g, 2)
        self.assertEqual(report.measure, 0.0)
        self.assertTrue(all(s.size == 0 for s in report.sets))
        self.assertTrue(report.chain_holds)
        self.assertAlmostEqual(report.thresholds[0], 0.5 * math.sqrt(1 / 6 + 1 / 4))


if __name__ == '__main__':
    unittest.main()
