"""Unit tests for the bound engine and its scalar pieces."""

import json
import math
import unittest
from dataclasses import replace

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from config.condition_rules import LEMMA_ORDER
from core.bounds import (BoundEngine, BoundInputs, estimator_bounds, floor_group_size, integrated_laplacian_bound,
                         laplacian_bound, misclustering_bound, optimal_k, pi_floor, sigma_G_lower)
from core.errors import ModelSpecError
from core.localized_laplacian import population_factorization, population_laplacians
from core.sbm_core import ConstantPiField, ModelConfig, Network, PlantedPartitionField, Region, model_from_fields


def make_inputs(**overrides):
    values = dict(N=128, k=64, d=1, G=2, delta=0.1, tau=0.0, c=1.0, T=1.0, b_X=1.0, U_X=1.0, U_bar_X=1.0,
                  l_B=0.0, l_pi=0.0, Delta=0.6, pi_min=0.5, B_matrix=np.array([[0.6, 0.2], [0.2, 0.6]]),
                  N_h=[64, 64])
    values.update(overrides)
    return BoundInputs(**values)


def planted_spec():
    return ModelConfig.model_validate(
        {'G': 2, 'd': 1, 'field': {'name': 'planted-partition', 'params': {'p': 0.6, 'q': 0.2}}}).build()


class TestInputs(unittest.TestCase):
    """Test cases for BoundInputs validation."""

    def test_delta_range(self):
        """delta must lie strictly between 0 and 1."""
        for delta in (0.0, 1.0):
            with self.assertRaises(ModelSpecError):
                make_inputs(delta=delta)

    def test_k_range(self):
        """k must lie in [1, N]."""
        with self.assertRaises(ModelSpecError):
            make_inputs(k=200)

    def test_from_spec(self):
        """Constants and B(x, x') come from the model."""
        inputs = BoundInputs.from_spec(planted_spec(), 1000, 100, 0.1, 0.0, [0.2], [0.8])
        self.assertEqual(inputs.G, 2)
        self.assertAlmostEqual(inputs.c, 0.5)
        np.testing.assert_allclose(inputs.B_matrix, [[0.6, 0.2], [0.2, 0.6]])
        self.assertAlmostEqual(inputs.R_k, 0.2)
        self.assertIsNone(inputs.underline_R_k)

    def test_from_spec_needs_constants(self):
        """User fields without constants cannot be bounded."""
        spec = model_from_fields(PlantedPartitionField(2, 1, 0.5, 0.1), ConstantPiField([0.5, 0.5]),
                                 Region.unit_cube(1))
        with self.assertRaises(ModelSpecError):
            BoundInputs.from_spec(spec, 100, 10, 0.1, 0.0, [0.5], [0.5])


class TestScalarPieces(unittest.TestCase):
    """Test cases for floors, Laplacian bounds and the singular value floor."""

    def setUp(self):
        """Set up test fixtures."""
        self.inputs = make_inputs()

    def test_floor_example(self):
        """c = b_X = Ubar_X = 1, N_h/N = 1/2, k = 64 gives floor 2."""
        floors = floor_group_size(self.inputs)
        self.assertEqual(floors.values, [2, 2])
        self.assertEqual(floors.minimum, 2)
        self.assertFalse(floors.surrogate)

    def test_floor_surrogate(self):
        """Without N_h every community uses pi_min N / 2."""
        floors = floor_group_size(replace(self.inputs, N_h=None))
        self.assertTrue(floors.surrogate)
        self.assertEqual(floors.values, [1, 1])

    def test_small_k_floors_to_zero(self):
        """Small k floors to zero and the downstream bounds turn vacuous."""
        inputs = make_inputs(k=10)
        self.assertEqual(floor_group_size(inputs).minimum, 0)
        self.assertEqual(misclustering_bound(inputs).value, math.inf)
        self.assertTrue(misclustering_bound(inputs).vacuous)

    def test_pi_floor(self):
        """floor(pi_min c b_X k / (32 Ubar_X))."""
        self.assertEqual(pi_floor(make_inputs(k=128, N=256)), (2, 2.0))

    def test_laplacian_bound_value(self):
        """k=100, delta=0.1, tau=0, d_min=50, l_B=0 gives 4 sqrt(3 ln(8k/delta) / 50)."""
        inputs = make_inputs(N=1000, k=100)
        expected = 4.0 * math.sqrt(3.0 * math.log(8000.0) / 50.0)
        self.assertAlmostEqual(laplacian_bound(inputs, 50.0), expected, places=12)
        self.assertAlmostEqual(expected, 2.937, places=3)

    def test_laplacian_bound_bias(self):
        """Positive l_B adds r (r + 3) with r = 2 k l_B R_k / (D + tau)."""
        inputs = make_inputs(N=1000, k=100, l_B=0.5, tau=2.0)
        r = 2.0 * 100 * 0.5 * inputs.R_k / 52.0
        variance = 4.0 * math.sqrt(3.0 * math.log(8000.0) / 52.0)
        self.assertAlmostEqual(laplacian_bound(inputs, 50.0), variance + r * (r + 3.0), places=12)

    def test_laplacian_bound_nonpositive_denominator(self):
        """d_min + tau = 0 gives an infinite bound."""
        self.assertEqual(laplacian_bound(self.inputs, 0.0), math.inf)

    def test_laplacian_bound_decreases_with_degree(self):
        """The bound falls monotonically towards 0 as the degree grows."""
        values = [laplacian_bound(self.inputs, degree) for degree in np.geomspace(1, 1e8, 30)]
        self.assertTrue(all(a > b for a, b in zip(values, values[1:])))
        self.assertLess(values[-1], 1e-2)

    def test_integrated_bound_uses_floor(self):
        """The integrated form replaces d_min by Delta times the minimal floor and ln(8..) by ln(24..)."""
        expected = 4.0 * math.sqrt(3.0 * math.log(24 * 64 / 0.1) / (0.6 * 2))
        self.assertAlmostEqual(integrated_laplacian_bound(self.inputs), expected, places=12)

    def test_sigma_lower_diagonal(self):
        """B = p I with floor k/2 and tau = 0 gives 1/2."""
        inputs = make_inputs(N=1000, k=100)
        lower = sigma_G_lower(inputs, B_matrix=0.5 * np.eye(2), group_floor=50)
        self.assertAlmostEqual(lower.value, 0.5)
        self.assertFalse(lower.rank_deficient)

    def test_sigma_lower_rank_deficient(self):
        """A rank-deficient B gives 0 and is flagged."""
        lower = sigma_G_lower(self.inputs, B_matrix=0.5 * np.ones((2, 2)), group_floor=10)
        self.assertEqual(lower.value, 0.0)
        self.assertTrue(lower.rank_deficient)

    def test_sigma_lower_below_population_singular_value(self):
        """The floor never exceeds lambda_G of the population factorization."""
        spec = planted_spec()
        g = np.array([0] * 6 + [1] * 4)
        network = Network(X=np.linspace(0, 1, 10)[:, None], A=np.zeros((10, 10), dtype=np.uint8), g=g, G=2)
        eta = np.arange(10)
        pop = population_laplacians(spec, network, eta, eta, [0.3], [0.7], 1.0)
        lambda_G = population_factorization(pop).Lambda[1]
        inputs = make_inputs(N=10, k=10, tau=1.0)
        self.assertLessEqual(sigma_G_lower(inputs, group_floor=4).value, lambda_G + 1e-12)


class TestOptimalK(unittest.TestCase):
    """Test cases for the suggested neighborhood size."""

    def test_reference_value(self):
        """d=1, rho=1, N=1000 gives k = 1000^(2/3) = 100."""
        result = optimal_k(1000, 1)
        self.assertEqual(result.k, 100)
        self.assertAlmostEqual(result.rate, 0.1)
        self.assertAlmostEqual(result.exponent, -1.0 / 3.0)

    def test_halving_rho(self):
        """Halving rho scales k by 2^(d/(d+2))."""
        full = optimal_k(1000, 2, rho=1.0)
        half = optimal_k(1000, 2, rho=0.5)
        self.assertAlmostEqual(half.k_real / full.k_real, 2.0 ** 0.5)

    def test_rho_must_be_positive(self):
        """rho = 0 has no suggestion."""
        with self.assertRaises(ModelSpecError):
            optimal_k(100, 1, rho=0.0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=1, max_value=10 ** 6), st.integers(min_value=1, max_value=4))
    def test_within_range(self, N, d):
        """The suggestion always lies in [1, N]."""
        result = optimal_k(N, d)
        self.assertTrue(1 <= result.k <= N)
        self.assertAlmostEqual(result.exponent, -1.0 / (d + 2))


class TestEngine(unittest.TestCase):
    """Test cases for the full bound report."""

    def setUp(self):
        """Set up test fixtures."""
        self.engine = BoundEngine()
        N = 4000
        self.inputs = BoundInputs.from_spec(planted_spec(), N, optimal_k(N, 1).k, 0.1, 0.0, [0.3], [0.7],
                                            N_h=[2000, 2000], d_min=50.0, sup_radius=0.05)

    def test_every_lemma_reported(self):
        """All lemmas appear, none with NaN, all non-negative."""
        report = self.engine.evaluate(self.inputs)
        self.assertEqual(list(report.records), LEMMA_ORDER)
        for record in report.records.values():
            self.assertFalse(math.isnan(record.value))
            self.assertGreaterEqual(record.value, 0.0)
        json.dumps(report.to_dict())
        self.assertEqual(len(report.summary_rows()), len(LEMMA_ORDER))

    def test_dual_coded_misclustering_rate(self):
        """clustRate agrees with a direct transcription of the formula."""
        inputs = self.inputs
        k = inputs.k
        floor = math.floor(0.5 / 16 * 0.5 * 1.0 * k)
        lap = 4.0 * math.sqrt(3.0 * math.log(24 * k / 0.1) / (0.6 * floor))
        expected = 512 * 2 * (0.6 * k) ** 2 / (0.4 ** 2 * floor ** 2) * lap ** 2
        self.assertTrue(math.isclose(misclustering_bound(inputs).value, expected, rel_tol=1e-12))

    def test_dual_coded_estimator_rates(self):
        """rate_BHat_g and rate_piHat agree with direct transcriptions."""
        inputs = self.inputs
        k, N = inputs.k, inputs.N
        floor = math.floor(0.5 / 16 * 0.5 * k)
        lap48 = 4.0 * math.sqrt(3.0 * math.log(48 * k / 0.1) / (0.6 * floor))
        prefactor = 1024 * 2 * (0.6 * k) ** 2 / (0.4 ** 2 * floor ** 2) * (k / floor + k ** 2 / floor ** 2)
        expected_B = prefactor * lap48 ** 2 + math.sqrt(2.0 * math.log(40.0)) / floor
        records = estimator_bounds(inputs)
        self.assertTrue(math.isclose(records['rate_BHat_g'].value, expected_B, rel_tol=1e-12))
        variance = 2.0 * math.sqrt((math.log(N) + math.log(60.0)) / k)
        self.assertAlmostEqual(records['rate_piHat'].terms['variance'], variance, places=12)
        self.assertEqual(records['rate_piHat'].terms['bias'], 0.0)

    def test_doubling_k_shrinks_pi_variance(self):
        """The pi_hat sampling term falls by sqrt(2) when k doubles."""
        base = estimator_bounds(replace(self.inputs, k=200))['rate_piHat'].terms['variance']
        doubled = estimator_bounds(replace(self.inputs, k=400))['rate_piHat'].terms['variance']
        self.assertAlmostEqual(base / doubled, math.sqrt(2.0))

    def test_smaller_delta_gives_larger_bounds(self):
        """Every finite bound grows as delta shrinks."""
        loose = self.engine.evaluate(self.inputs)
        tight = self.engine.evaluate(self.inputs.with_delta(0.01))
        for lemma in ('boundLaplacians', 'integr', 'clustRate', 'rate_BHat_g', 'rate_piHat'):
            self.assertGreater(tight.value(lemma), loose.value(lemma))

    def test_constraint_forms(self):
        """Printed and implied right-hand sides differ by 512 G; only the printed one gates."""
        record = self.engine.evaluate_lemma(self.inputs, 'clusteringConstraintDeterm')
        terms = record.terms
        self.assertAlmostEqual(terms['printed_rhs'] / terms['implied_rhs'], 512 * 2)
        gating = {check.rule_id: check.gating for check in record.conditions}
        self.assertTrue(gating['clusteringConstraintDeterm.1'])
        self.assertFalse(gating['clusteringConstraintDeterm.implied'])

    def test_conditions_record_both_sides(self):
        """Failing conditions keep both sides and make the lemma non-applicable."""
        inputs = replace(self.inputs, k=5)
        record = self.engine.evaluate_lemma(inputs, 'integr')
        self.assertFalse(record.applicable)
        failed = record.failed_conditions()
        self.assertTrue(failed)
        self.assertTrue(all(check.lhs is not None and check.rhs is not None for check in failed))

    def test_missing_d_min(self):
        """Without d_min the conditional Laplacian bound is infinite and not applicable."""
        report = self.engine.evaluate(replace(self.inputs, d_min=None))
        self.assertEqual(report.value('boundLaplacians'), math.inf)
        self.assertFalse(report.applicable('boundLaplacians'))
        check = [c for c in report.records['boundLaplacians'].conditions if c.rule_id == 'boundLaplacians.2'][0]
        self.assertIsNone(check.rhs)

    def test_rank_deficient_flag(self):
        """A rank-deficient B is flagged and fails the singular value condition."""
        inputs = replace(self.inputs, B_matrix=0.4 * np.ones((2, 2)))
        report = self.engine.evaluate(inputs)
        self.assertTrue(report.summary.flags['rank_deficient_B'])
        self.assertFalse(report.applicable('bdsingularvalue'))
        self.assertEqual(report.value('clustRate'), math.inf)

    def test_surrogate_flag(self):
        """Missing N_h is reported in the summary flags."""
        report = self.engine.evaluate(replace(self.inputs, N_h=None))
        self.assertTrue(report.summary.flags['surrogate_floors'])


class TestAbsentCommunity(unittest.TestCase):
    """Test cases for a model in which one community has zero probability."""

    def setUp(self):
        """Set up test fixtures."""
        self.spec = ModelConfig.model_validate({
            'G': 2, 'd': 1, 'field': {'name': 'planted-partition', 'params': {'p': 0.6, 'q': 0.2}},
            'pi': {'kind': 'constant', 'weights': [1.0, 0.0]},
        }).build()
        self.inputs = BoundInputs.from_spec(self.spec, 1000, 100, 0.1, 0.0, [0.3], [0.7])

    def test_unbounded_density_gives_zero_floors(self):
        """An infinite Ubar_X makes every floor zero instead of overflowing."""
        self.assertTrue(math.isinf(self.inputs.U_bar_X))
        floors = floor_group_size(self.inputs)
        self.assertEqual(floors.minimum, 0)
        self.assertEqual(floors.values, [0, 0])
        self.assertEqual(pi_floor(self.inputs), (0, 0.0))

    def test_engine_reports_vacuous_bounds(self):
        """Every estimator bound is vacuous and none applies."""
        report = BoundEngine().evaluate(self.inputs)
        for lemma in ('integr', 'clustRate', 'rate_BHat_g', 'rate_piHat', 'rate_BHat'):
            self.assertTrue(report.records[lemma].vacuous, lemma)
            self.assertFalse(report.applicable(lemma), lemma)
        document = report.to_dict()
        self.assertIsNone(document['lemmas']['rate_BHat_g']['value'])
        json.dumps(document)

    def test_underline_radius_needs_enough_neighbours(self):
        """underline R_k is undefined below the log margin, also with an infinite Ubar_X."""
        self.assertIsNone(self.inputs.underline_R_k)
        self.assertEqual(replace(self.inputs, k=1000).underline_R_k, 0.0)


if __name__ == '__main__':
    unittest.main()
