"""Unit tests for the Monte Carlo harness: plans, replications, coverage and rate slopes."""

import math
import os
import unittest
from unittest.mock import patch

import numpy as np
from pydantic import ValidationError

from core.errors import ModelSpecError, PlanError
from core.montecarlo_harness import (AcceptanceCheck, Coverage, ExperimentPlan, ExperimentResult, ReplicationRecord,
                                     coverage, coverage_fraction, fit_rate_slope, metric_medians, rate_slope,
                                     resolve_metric, run_plan, run_replication, run_sweep)
from utils.helpers import rng_stream

SLOW = os.environ.get('COVSBM_SLOW') == '1'

MODEL = {'G': 2, 'd': 1, 'field': {'name': 'planted-partition', 'params': {'p': 0.6, 'q': 0.2}}}


def small_plan(**overrides):
    document = {'model': MODEL, 'pairs': [{'x': [0.3], 'xp': [0.7]}], 'N': [200], 'k': [60],
                'grid_resolution': 10, 'restarts': 3, 'seed': 17}
    document.update(overrides)
    return ExperimentPlan.model_validate(document)


def synthetic_record(N, value, bound, applicable, rep=0, failure=None):
    return ReplicationRecord(
        seed=0, replication=rep, N=N, k=10, tau_policy='mean-degree', delta=0.1, pair_index=0,
        x=[0.5], xp=[0.5], metrics={'B_error': value},
        bounds={'conditional': {'rate_BHat_g': {'value': bound, 'applicable': applicable}},
                'marginal': {'rate_BHat_g': {'value': bound, 'applicable': False}}},
        failure=failure)


class TestCoverage(unittest.TestCase):
    """Test cases for coverage fractions and their standard errors."""

    def test_reference_fraction(self):
        """185 of 200 gives 0.925 with standard error 0.0186."""
        result = coverage_fraction([True] * 185 + [False] * 15)
        self.assertAlmostEqual(result.fraction, 0.925)
        self.assertAlmostEqual(result.standard_error, math.sqrt(0.925 * 0.075 / 200))
        self.assertAlmostEqual(result.standard_error, 0.0186, places=4)

    def test_all_pass(self):
        """Every pass gives coverage 1 with zero standard error."""
        result = coverage_fraction([True] * 20)
        self.assertEqual(result.fraction, 1.0)
        self.assertEqual(result.standard_error, 0.0)

    def test_empty_rejected(self):
        """Coverage of nothing is undefined."""
        with self.assertRaises(PlanError):
            coverage_fraction([])

    def test_binomial_stream(self):
        """Bernoulli(0.9) draws land within four standard errors of 0.9."""
        draws = rng_stream(3, 0, 'tests').random(2000) < 0.9
        result = coverage_fraction(draws)
        self.assertLess(abs(result.fraction - 0.9), 4 * math.sqrt(0.9 * 0.1 / 2000))

    def test_meets_target(self):
        """A target is met within three standard errors."""
        self.assertTrue(Coverage(185, 200).meets(0.9))
        self.assertFalse(Coverage(150, 200).meets(0.9))
        self.assertFalse(Coverage(0, 0).meets(0.9))

    def test_strata_filter_records(self):
        """Strata keep records whose conditions pass; 'all' keeps every successful record."""
        records = [
            synthetic_record(100, 0.1, 0.2, True),
            synthetic_record(100, 0.3, 0.2, False),
            synthetic_record(100, 0.1, None, True),
            synthetic_record(100, 0.1, 0.2, True, failure='LaplacianError: isolated'),
        ]
        conditional = coverage(records, 'B_err', 'rate_BHat_g', 'conditional')
        self.assertEqual((conditional.passed, conditional.total), (2, 2))
        everything = coverage(records, 'B_error', 'rate_BHat_g', 'all')
        self.assertEqual((everything.passed, everything.total), (2, 3))
        with self.assertRaises(PlanError):
            coverage(records, 'B_error', 'rate_BHat_g', 'marginal')

    def test_unknown_metric(self):
        """Aliases resolve and unknown names are rejected."""
        self.assertEqual(resolve_metric('B_err'), 'B_error')
        self.assertEqual(resolve_metric('L_dev'), 'laplacian_deviation')
        with self.assertRaises(PlanError):
            resolve_metric('accuracy')


class TestRateSlope(unittest.TestCase):
    """Test cases for log-log slope fitting."""

    def setUp(self):
        """Set up test fixtures."""
        self.N = [100, 200, 400, 800, 1600]

    def test_exact_power_law(self):
        """An exact power law N^(-1/3) has slope -1/3."""
        result = fit_rate_slope(self.N, [3.0 * n ** (-1.0 / 3.0) for n in self.N])
        self.assertAlmostEqual(result.slope, -1.0 / 3.0, places=10)
        self.assertAlmostEqual(result.intercept, math.log(3.0), places=10)
        self.assertLessEqual(result.ci_low, result.slope)
        self.assertGreaterEqual(result.ci_high, result.slope)

    def test_too_few_points(self):
        """Two points cannot give a confidence interval."""
        with self.assertRaises(PlanError):
            fit_rate_slope([100, 200], [0.5, 0.4])

    def test_non_positive_medians_excluded(self):
        """Zero medians are dropped and reported."""
        medians = [n ** -0.5 for n in self.N] + [0.0]
        result = fit_rate_slope(self.N + [3200], medians)
        self.assertEqual(result.excluded, [3200])
        self.assertAlmostEqual(result.slope, -0.5, places=10)

    def test_medians_from_records(self):
        """Per-N medians skip failed records."""
        records = []
        for N in self.N:
            for rep, scale in enumerate((0.5, 1.0, 2.0)):
                records.append(synthetic_record(N, scale * N ** -0.25, None, False, rep=rep))
            records.append(synthetic_record(N, 100.0, None, False, rep=9, failure='ClusteringError: x'))
        medians = metric_medians(records, 'B_error')
        self.assertAlmostEqual(medians[100], 100 ** -0.25)
        self.assertAlmostEqual(rate_slope(records, 'B_err').slope, -0.25, places=10)


class TestPlan(unittest.TestCase):
    """Test cases for plan validation."""

    def test_defaults(self):
        """k defaults to 'optimal' and tau to 'mean-degree'."""
        plan = small_plan(k=['optimal'])
        self.assertEqual(plan.tau, ['mean-degree'])
        self.assertEqual(plan.resolved_k(1000, plan.spec()), [100])

    def test_duplicate_k_dropped(self):
        """An explicit k equal to the optimal one is kept once."""
        plan = small_plan(k=['optimal', 100, 50])
        self.assertEqual(plan.resolved_k(1000, plan.spec()), [100, 50])

    def test_needs_pairs(self):
        """A plan without pairs or pair_grid is rejected."""
        with self.assertRaises(ValidationError):
            small_plan(pairs=[])

    def test_pairs_inside_region(self):
        """Query points outside the region are rejected."""
        with self.assertRaises(ValidationError):
            small_plan(pairs=[{'x': [1.5], 'xp': [0.5]}])

    def test_ranges(self):
        """delta, k and N ranges are enforced."""
        for overrides in ({'delta': [1.0]}, {'k': [0]}, {'N': [0]}, {'tau': [-1.0]}, {'replications': 0}):
            with self.assertRaises(ValidationError):
                small_plan(**overrides)

    def test_pair_grid(self):
        """A 2-point grid on [0,1] gives all 4 ordered pairs."""
        plan = small_plan(pairs=[], pair_grid=2)
        self.assertEqual(len(plan.query_pairs()), 4)


class TestReplication(unittest.TestCase):
    """Test cases for single replications."""

    def setUp(self):
        """Set up test fixtures."""
        self.plan = small_plan()

    def test_deterministic(self):
        """The same plan and replication index give identical rows."""
        first = [record.to_row() for record in run_replication(self.plan, 0)]
        second = [record.to_row() for record in run_replication(self.plan, 0)]
        self.assertEqual(first, second)

    def test_record_contents(self):
        """A successful record carries metrics, radii and both bound strata."""
        records = run_replication(self.plan, 0)
        self.assertEqual(len(records), 1)
        record = records[0]
        self.assertFalse(record.failed, record.failure)
        for name in ('laplacian_deviation', 'misclassification_x', 'B_error', 'pi_error', 'sup_radius'):
            self.assertIn(name, record.metrics)
        self.assertEqual(set(record.bounds), {'conditional', 'marginal'})
        self.assertIn('R_k', record.radius)
        self.assertGreaterEqual(record.metrics['sup_radius'], record.metrics['inf_radius'])

    def test_noiseless_far_pairs_cluster_exactly(self):
        """Noiseless edges with disjoint neighborhoods give zero misclassification."""
        plan = small_plan(noiseless=True, pairs=[{'x': [0.15], 'xp': [0.85]}])
        record = run_replication(plan, 0)[0]
        self.assertFalse(record.failed, record.failure)
        self.assertEqual(record.metric('misclassification_x'), 0.0)
        self.assertEqual(record.metric('misclassification_xp'), 0.0)

    def test_empty_graph_is_recorded_as_failure(self):
        """rho = 0 gives a failure record instead of an exception."""
        plan = small_plan(model={**MODEL, 'rho': 0.0}, k=[20])
        record = run_replication(plan, 0)[0]
        self.assertTrue(record.failed)
        self.assertIn('LaplacianError', record.failure)
        self.assertEqual(record.bounds, {})

    def test_one_record_per_delta(self):
        """Each delta gets its own record from the same measurement."""
        plan = small_plan(delta=[0.05, 0.2])
        records = run_replication(plan, 0)
        self.assertEqual([r.delta for r in records], [0.05, 0.2])
        self.assertEqual(records[0].metrics, records[1].metrics)

    def test_bound_error_is_recorded(self):
        """A bound evaluation error is stored on the record and the batch continues."""
        with patch('core.montecarlo_harness.BoundInputs.from_spec', side_effect=ModelSpecError('bad constants')):
            records = run_replication(small_plan(delta=[0.05, 0.2]), 0)
        self.assertEqual(len(records), 2)
        for record in records:
            self.assertFalse(record.failed, record.failure)
            self.assertEqual(record.bounds, {})
            self.assertIn('bad constants', record.diagnostics['bounds_error'])
            self.assertIn('B_error', record.metrics)


class TestPlanExecution(unittest.TestCase):
    """Test cases for run_plan and run_sweep."""

    def test_run_plan(self):
        """Records are sorted and the summary is reproducible."""
        plan = small_plan(replications=2, N=[150], k=[50])
        first = run_plan(plan)
        second = run_plan(plan)
        self.assertEqual(len(first.records), 2)
        self.assertEqual([r.replication for r in first.records], [0, 1])
        self.assertEqual(first.summary(), second.summary())
        self.assertTrue(any(row.stratum == 'all' for row in first.coverage_rows))

    def test_skipped_checks_do_not_fail(self):
        """Only explicit failures break acceptance."""
        result = ExperimentResult(plan=small_plan(), records=[], coverage_rows=[],
                                  acceptance=[AcceptanceCheck('radius_lower', None, 'no admissible records')])
        self.assertTrue(result.all_passed)
        self.assertEqual(result.acceptance[0].status, 'SKIPPED')

    def test_sweep_needs_grid(self):
        """A sweep over fewer than four N values is rejected."""
        with self.assertRaises(PlanError):
            run_sweep(small_plan(N=[100, 200]), 'B_error')

    @unittest.skipUnless(SLOW, "set COVSBM_SLOW=1 to run")
    def test_workers_do_not_change_records(self):
        """Parallel and serial runs give identical rows."""
        plan = small_plan(replications=3)
        serial = [r.to_row() for r in run_plan(plan, workers=1).records]
        parallel = [r.to_row() for r in run_plan(plan, workers=2).records]
        self.assertEqual(serial, parallel)

    @unittest.skipUnless(SLOW, "set COVSBM_SLOW=1 to run")
    def test_sweep_slope(self):
        """The Laplacian deviation decays along the optimal-k path."""
        plan = small_plan(N=[250, 500, 1000, 2000], replications=3, k=['optimal'])
        sweep = run_sweep(plan, 'L_dev')
        self.assertLess(sweep.slope.slope, 0.0)
        self.assertAlmostEqual(sweep.expected_exponent, -1.0 / 3.0)


if __name__ == '__main__':
    unittest.main()
