"""Replicated experiments: empirical deviations, errors and coverage of the bounds."""

import functools
import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import stats

from config.settings import (BOUND_METRICS, COVERAGE_SE_MULTIPLIER, DEFAULT_DELTA, GRID_RESOLUTION,
                             KMEANS_RESTARTS, MIN_SLOPE_POINTS, RECORD_METRICS, SLOPE_CONFIDENCE)
from core.bounds import BoundEngine, BoundInputs, optimal_k
from core.errors import CovariateSBMError, PlanError
from core.estimators import EstimationMode, align_to_truth
from core.knn_neighborhoods import radius_envelopes, radius_grid, region_grid
from core.localized_laplacian import (laplacian_deviation, min_degree, population_factorization,
                                      population_laplacians)
from core.pipeline import estimate_pair
from core.sbm_core import ModelConfig, ModelSpec, Network, generate_network
from core.spectral_clustering import ClusteringConfig, davis_kahan_check, misclustering_sets
from utils.helpers import finite_or_none, membership_matrix

logger = logging.getLogger(__name__)

STRATA = ('conditional', 'marginal')
LEMMA_STRATUM = {
    'boundLaplacians': 'conditional',
    'integr': 'conditional',
    'clustRate': 'conditional',
    'rate_BHat_g': 'conditional',
    'rate_piHat': 'marginal',
    'rate_BHat': 'marginal',
}
METRIC_ALIASES = {'B_err': 'B_error', 'pi_err': 'pi_error', 'L_dev': 'laplacian_deviation'}
ACCEPTANCE_PROPERTIES = ('coverage', 'davis_kahan', 'radius')

TauValue = Union[float, Literal['mean-degree']]
KValue = Union[int, Literal['optimal']]


def resolve_metric(name: str) -> str:
    metric = METRIC_ALIASES.get(name, name)
    if metric not in RECORD_METRICS:
        raise PlanError(f"unknown metric {name!r}; choose from {RECORD_METRICS}")
    return metric


# ---------------------------------------------------------------------------
# Plan
# ---------------------------------------------------------------------------

class QueryPair(BaseModel):
    model_config = ConfigDict(extra='forbid')
    x: List[float]
    xp: List[float]


class ExperimentPlan(BaseModel):
    """plan.json: model, query pairs and the (N, k, tau, delta) grid."""
    model_config = ConfigDict(extra='forbid')

    model: ModelConfig
    pairs: List[QueryPair] = Field(default_factory=list)
    pair_grid: Optional[int] = Field(default=None, ge=2)
    N: List[int] = Field(min_length=1)
    k: List[KValue] = Field(default_factory=lambda: ['optimal'], min_length=1)
    tau: List[TauValue] = Field(default_factory=lambda: ['mean-degree'], min_length=1)
    delta: List[float] = Field(default_factory=lambda: [DEFAULT_DELTA], min_length=1)
    replications: int = Field(default=1, ge=1)
    seed: int = 0
    workers: int = Field(default=1, ge=1)
    grid_resolution: int = Field(default=GRID_RESOLUTION, ge=2)
    restarts: int = Field(default=KMEANS_RESTARTS, ge=1)
    mode: EstimationMode = 'exclude-self'
    noiseless: bool = False
    acceptance: List[Literal['coverage', 'davis_kahan', 'radius']] = Field(
        default_factory=lambda: list(ACCEPTANCE_PROPERTIES))

    @field_validator('N')
    @classmethod
    def _positive_sizes(cls, value):
        if any(n < 1 for n in value):
            raise ValueError("every N must be >= 1")
        return value

    @field_validator('k')
    @classmethod
    def _positive_k(cls, value):
        if any(isinstance(k, int) and k < 1 for k in value):
            raise ValueError("every explicit k must be >= 1")
        return value

    @field_validator('tau')
    @classmethod
    def _nonnegative_tau(cls, value):
        if any(not isinstance(t, str) and t < 0 for t in value):
            raise ValueError("every numeric tau must be >= 0")
        return value

    @field_validator('delta')
    @classmethod
    def _delta_range(cls, value):
        if any(not 0 < d < 1 for d in value):
            raise ValueError("every delta must lie in (0, 1)")
        return value

    @model_validator(mode='after')
    def _pairs_inside_region(self):
        if not self.pairs and self.pair_grid is None:
            raise ValueError("plan needs query pairs or a pair_grid")
        region = self.model.region()
        for index, pair in enumerate(self.pairs):
            for name, point in (('x', pair.x), ('xp', pair.xp)):
                if len(point) != self.model.d:
                    raise ValueError(f"pair {index}: {name} has dimension {len(point)}, model has d={self.model.d}")
                if not region.contains(np.asarray(point, dtype=float)):
                    raise ValueError(f"pair {index}: {name}={point} lies outside the covariate region")
        return self

    def spec(self) -> ModelSpec:
        return self.model.build()

    def query_pairs(self) -> List[Tuple[np.ndarray, np.ndarray]]:
        pairs = [(np.asarray(p.x, dtype=float), np.asarray(p.xp, dtype=float)) for p in self.pairs]
        if self.pair_grid is not None:
            grid = region_grid(self.model.region(), self.pair_grid)
            pairs += [(grid[a].copy(), grid[b].copy()) for a, b in itertools.product(range(len(grid)), repeat=2)]
        return pairs

    def resolved_k(self, N: int, spec: ModelSpec) -> List[int]:
        """Explicit k values plus optimal_k(N) for 'optimal'; duplicates dropped, order kept."""
        values = []
        for k in self.k:
            if k == 'optimal':
                rho = spec.rho if spec.rho > 0 else 1.0
                k = optimal_k(N, spec.d, rho).k
            if k not in values:
                values.append(int(k))
        return values


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------

@dataclass
class ReplicationRecord:
    """Metrics and bounds for one (replication, N, k, tau, delta, query pair)."""
    seed: int
    replication: int
    N: int
    k: int
    tau_policy: str
    delta: float
    pair_index: int
    x: List[float]
    xp: List[float]
    tau: Optional[float] = None
    metrics: Dict[str, Optional[float]] = field(default_factory=dict)
    bounds: Dict[str, Dict[str, Dict[str, Any]]] = field(default_factory=dict)
    radius: Dict[str, Any] = field(default_factory=dict)
    davis_kahan: Dict[str, Any] = field(default_factory=dict)
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    failure: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.failure is not None

    def sort_key(self) -> Tuple:
        return (self.N, self.k, self.tau_policy, self.delta, self.replication, self.pair_index)

    def metric(self, name: str) -> Optional[float]:
        return self.metrics.get(name)

    def bound_value(self, lemma: str, stratum: str) -> Optional[float]:
        return self.bounds.get(stratum, {}).get(lemma, {}).get('value')

    def bound_applicable(self, lemma: str, stratum: str) -> bool:
        return bool(self.bounds.get(stratum, {}).get(lemma, {}).get('applicable', False))

    def to_row(self) -> Dict[str, Any]:
        """Flat row with a stable column order."""
        row = {
            'seed': self.seed,
            'replication': self.replication,
            'N': self.N,
            'k': self.k,
            'tau_policy': self.tau_policy,
            'tau': self.tau,
            'delta': self.delta,
            'pair': self.pair_index,
            'x': ','.join(repr(float(v)) for v in self.x),
            'xp': ','.join(repr(float(v)) for v in self.xp),
            'failure': self.failure or '',
        }
        for name in RECORD_METRICS:
            row[name] = self.metrics.get(name)
        row['dk_lhs'] = self.davis_kahan.get('lhs')
        row['dk_rhs'] = self.davis_kahan.get('rhs')
        row['dk_holds'] = self.davis_kahan.get('holds')
        row['R_k'] = self.radius.get('R_k')
        row['underline_R_k'] = self.radius.get('underline_R_k')
        row['d_min'] = self.diagnostics.get('d_min')
        for stratum in STRATA:
            for lemma in BOUND_METRICS:
                row[f'{lemma}_{stratum}'] = self.bound_value(lemma, stratum)
                row[f'{lemma}_{stratum}_applicable'] = self.bound_applicable(lemma, stratum)
        return row


@dataclass
class PairMeasurement:
    tau: Optional[float] = None
    metrics: Dict[str, Optional[float]] = field(default_factory=dict)
    davis_kahan: Dict[str, Any] = field(default_factory=dict)
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    d_min: Optional[float] = None
    failure: Optional[str] = None


def _failure_text(exc: Exception) -> str:
    return f"{type(exc).__name__}: {exc}"


def _pad_columns(M: np.ndarray, G: int) -> np.ndarray:
    if M.shape[1] >= G:
        return M
    return np.hstack([M, np.zeros((M.shape[0], G - M.shape[1]))])


def measure_pair(spec: ModelSpec, network: Network, x: np.ndarray, xp: np.ndarray, k: int,
                 tau: TauValue, config: ClusteringConfig, mode: EstimationMode = 'exclude-self') -> PairMeasurement:
    """Run the estimator at (x, x') and compare every output with the truth."""
    G = spec.G
    result = estimate_pair(network, x, xp, k, G, tau=tau, clustering_config=config, mode=mode)
    pop = population_laplacians(spec, network, result.eta_x, result.eta_xp, x, xp, result.tau)
    deviation = laplacian_deviation(result.laplacian.L, pop.L_xx)
    degrees = min_degree(pop)

    factorization = population_factorization(pop)
    Lambda = factorization.Lambda
    lambda_G = float(Lambda[G - 1]) if Lambda.size >= G else 0.0
    U_pop = _pad_columns(factorization.Theta_x @ factorization.Z_U, G)
    V_pop = _pad_columns(factorization.Theta_xp @ factorization.Z_V, G)
    decomposition = result.clustering.decomposition
    check = davis_kahan_check(decomposition.U, U_pop, lambda_G, deviation, G)
    check_xp = davis_kahan_check(decomposition.V, V_pop, lambda_G, deviation, G)

    kmeans_x, kmeans_xp = result.clustering.kmeans_x, result.clustering.kmeans_xp
    sets_x = misclustering_sets(kmeans_x.labels, kmeans_x.centroids, decomposition.U, U_pop, check.Q, pop.g_x, G)
    sets_xp = misclustering_sets(kmeans_xp.labels, kmeans_xp.centroids, decomposition.V, V_pop, check_xp.Q,
                                 pop.g_xp, G)

    truth_x = align_to_truth(result.Theta_hat_x, membership_matrix(pop.g_x, G))
    truth_xp = align_to_truth(result.Theta_hat_xp, membership_matrix(pop.g_xp, G))
    B_aligned = result.B_hat[np.ix_(truth_x.perm, truth_xp.perm)]
    B_undefined = bool(np.isnan(B_aligned).any())
    B_error = math.inf if B_undefined else float(np.max(np.abs(B_aligned - pop.B_pair)))
    pi_true = spec.pi.evaluate(np.asarray(x, dtype=float)[None, :])[0]
    pi_error = float(np.max(np.abs(result.pi_hat[truth_x.perm] - pi_true)))

    metrics = {
        'laplacian_deviation': deviation,
        'laplacian_deviation_xg': laplacian_deviation(result.laplacian.L, pop.L_xg),
        'misclassification_x': truth_x.measure,
        'misclassification_xp': truth_xp.measure,
        'misclustering_x': sets_x.measure,
        'misclustering_xp': sets_xp.measure,
        'B_error': B_error,
        'pi_error': pi_error,
    }
    return PairMeasurement(
        tau=result.tau,
        metrics=metrics,
        davis_kahan={'lhs': check.lhs, 'rhs': check.rhs, 'holds': check.holds,
                     'lhs_xp': check_xp.lhs, 'holds_xp': check_xp.holds, 'lambda_G': lambda_G},
        diagnostics={'d_min': degrees.d_min, 'B_undefined': B_undefined,
                     'rank_deficient': decomposition.rank_deficient,
                     'eigengap': decomposition.eigengap,
                     'chain_holds': sets_x.chain_holds and sets_xp.chain_holds,
                     'empty_groups_x': truth_x.empty_groups},
        d_min=degrees.d_min)


def _bound_entries(engine: BoundEngine, inputs: BoundInputs) -> Dict[str, Dict[str, Any]]:
    report = engine.evaluate(inputs)
    return {lemma: {'value': finite_or_none(report.value(lemma)), 'applicable': report.applicable(lemma)}
            for lemma in list(BOUND_METRICS) + ['radius', 'clusteringConstraintDeterm']}


def run_replication(plan: ExperimentPlan, rep_index: int) -> List[ReplicationRecord]:
    """One network per N; every (k, tau, pair, delta) is measured on it.

    Errors are stored on the record, never raised.
    """
    spec = plan.spec()
    pairs = plan.query_pairs()
    engine = BoundEngine()
    grid = region_grid(spec.region, plan.grid_resolution)
    records: List[ReplicationRecord] = []

    for N in plan.N:
        network, network_error = None, None
        try:
            network = generate_network(spec, N, plan.seed, rep_index, noiseless=plan.noiseless)
        except CovariateSBMError as exc:
            network_error = _failure_text(exc)
        N_h = np.bincount(network.g, minlength=spec.G) if network is not None else None

        for k in plan.resolved_k(N, spec):
            radius: Dict[str, Any] = {}
            radius_error = network_error
            if network is not None:
                try:
                    radii = radius_grid(network.X, k, grid)
                    radius = {'sup': float(radii.max()), 'inf': float(radii.min())}
                except CovariateSBMError as exc:
                    radius_error = _failure_text(exc)

            for tau in plan.tau:
                for pair_index, (x, xp) in enumerate(pairs):
                    measurement = PairMeasurement(failure=radius_error)
                    if measurement.failure is None:
                        config = ClusteringConfig(G=spec.G, restarts=plan.restarts, seed=plan.seed,
                                                  replication=rep_index)
                        try:
                            measurement = measure_pair(spec, network, x, xp, k, tau, config, plan.mode)
                        except CovariateSBMError as exc:
                            measurement = PairMeasurement(failure=_failure_text(exc))

                    for delta in plan.delta:
                        record = ReplicationRecord(
                            seed=plan.seed, replication=rep_index, N=N, k=k, tau_policy=str(tau), delta=delta,
                            pair_index=pair_index, x=x.tolist(), xp=xp.tolist(), tau=measurement.tau,
                            failure=measurement.failure, davis_kahan=dict(measurement.davis_kahan),
                            diagnostics=dict(measurement.diagnostics))
                        record.metrics = {name: finite_or_none(value) if value is not None else None
                                          for name, value in measurement.metrics.items()}
                        record.metrics['sup_radius'] = radius.get('sup')
                        record.metrics['inf_radius'] = radius.get('inf')
                        if spec.bounds_enabled and not record.failed:
                            try:
                                envelopes = radius_envelopes(spec, N, k, delta)
                                record.radius = {'R_k': envelopes.R_k, 'underline_R_k': envelopes.underline_R_k,
                                                 'upper_applicable': envelopes.upper_applicable,
                                                 'lower_applicable': envelopes.lower_applicable}
                                inputs = BoundInputs.from_spec(spec, N, k, delta, measurement.tau, x, xp,
                                                               N_h=N_h.tolist(), d_min=measurement.d_min,
                                                               sup_radius=radius.get('sup'))
                                record.bounds = {
                                    'conditional': _bound_entries(engine, inputs),
                                    'marginal': _bound_entries(engine, replace(inputs, N_h=None)),
                                }
                            except CovariateSBMError as exc:
                                record.bounds = {}
                                record.diagnostics['bounds_error'] = _failure_text(exc)
                        elif not spec.bounds_enabled:
                            record.diagnostics['bounds_disabled'] = True
                        records.append(record)
    return records


# ---------------------------------------------------------------------------
# Coverage and rate slopes
# ---------------------------------------------------------------------------

@dataclass
class Coverage:
    """Fraction of passes with its binomial standard error."""
    passed: int
    total: int

    @property
    def fraction(self) -> float:
        return self.passed / self.total if self.total else math.nan

    @property
    def standard_error(self) -> float:
        if not self.total:
            return math.nan
        p = self.fraction
        return math.sqrt(p * (1.0 - p) / self.total)

    def meets(self, target: float, se_multiplier: float = COVERAGE_SE_MULTIPLIER) -> bool:
        return self.total > 0 and self.fraction >= target - se_multiplier * self.standard_error


def coverage_fraction(passes: Sequence[bool]) -> Coverage:
    passes = [bool(p) for p in passes]
    if not passes:
        raise PlanError("coverage needs at least one record")
    return Coverage(passed=sum(passes), total=len(passes))


def coverage(records: Sequence[ReplicationRecord], metric: str, bound: str,
             stratum: str = 'all') -> Coverage:
    """Fraction of records with metric <= bound.

    'conditional' and 'marginal' keep records whose conditions pass in that
    stratum; 'all' keeps every successful record with the conditional value.
    Missing metrics count as misses.
    """
    metric = resolve_metric(metric)
    if stratum not in STRATA + ('all',):
        raise PlanError(f"unknown stratum {stratum!r}")
    source = 'conditional' if stratum == 'all' else stratum
    passes = []
    for record in records:
        if record.failed or source not in record.bounds:
            continue
        if stratum != 'all' and not record.bound_applicable(bound, stratum):
            continue
        value = record.metric(metric)
        limit = record.bound_value(bound, source)
        limit = math.inf if limit is None else limit
        passes.append(value is not None and value <= limit)
    return coverage_fraction(passes)


@dataclass
class RateSlope:
    slope: float
    intercept: float
    stderr: float
    ci_low: float
    ci_high: float
    confidence: float
    N: List[int]
    medians: List[float]
    excluded: List[int] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'slope': self.slope, 'intercept': self.intercept, 'stderr': self.stderr,
            'ci_low': self.ci_low, 'ci_high': self.ci_high, 'confidence': self.confidence,
            'N': self.N, 'medians': self.medians, 'excluded': self.excluded,
        }


def fit_rate_slope(N_values: Sequence[int], medians: Sequence[float],
                   confidence: float = SLOPE_CONFIDENCE) -> RateSlope:
    """OLS slope of log(median) on log(N) with a t-interval."""
    points = sorted(zip(N_values, medians))
    kept = [(n, m) for n, m in points if m is not None and math.isfinite(m) and m > 0]
    excluded = [int(n) for n, m in points if (n, m) not in kept]
    if excluded:
        logger.warning("rate slope excludes N=%s with non-positive or missing medians", excluded)
    if len(kept) < MIN_SLOPE_POINTS:
        raise PlanError(f"rate slope needs at least {MIN_SLOPE_POINTS} grid points with positive medians, "
                        f"got {len(kept)}")
    log_N = np.log([n for n, _ in kept])
    log_m = np.log([m for _, m in kept])
    fit = stats.linregress(log_N, log_m)
    t_value = stats.t.ppf(0.5 + confidence / 2.0, len(kept) - 2)
    return RateSlope(slope=float(fit.slope), intercept=float(fit.intercept), stderr=float(fit.stderr),
                     ci_low=float(fit.slope - t_value * fit.stderr), ci_high=float(fit.slope + t_value * fit.stderr),
                     confidence=confidence, N=[int(n) for n, _ in kept], medians=[float(m) for _, m in kept],
                     excluded=excluded)


def metric_medians(records: Sequence[ReplicationRecord], metric: str) -> Dict[int, Optional[float]]:
    """Median of a metric per N over successful records."""
    metric = resolve_metric(metric)
    grouped: Dict[int, List[float]] = {}
    for record in sorted(records, key=ReplicationRecord.sort_key):
        grouped.setdefault(record.N, [])
        value = record.metric(metric)
        if not record.failed and value is not None and math.isfinite(value):
            grouped[record.N].append(value)
    return {N: float(np.median(values)) if values else None for N, values in sorted(grouped.items())}


def rate_slope(records: Sequence[ReplicationRecord], metric: str,
               confidence: float = SLOPE_CONFIDENCE) -> RateSlope:
    """Log-log slope of the per-N median of a metric."""
    medians = metric_medians(records, metric)
    return fit_rate_slope(list(medians), list(medians.values()), confidence)


# ---------------------------------------------------------------------------
# Plan execution
# ---------------------------------------------------------------------------

@dataclass
class CoverageRow:
    lemma: str
    metric: str
    stratum: str
    delta: float
    passed: int
    total: int
    fraction: float
    standard_error: float
    target: float
    meets: bool


@dataclass
class AcceptanceCheck:
    name: str
    passed: Optional[bool]
    detail: str = ""

    @property
    def status(self) -> str:
        if self.passed is None:
            return 'SKIPPED'
        return 'PASS' if self.passed else 'FAIL'


@dataclass
class ExperimentResult:
    plan: ExperimentPlan
    records: List[ReplicationRecord]
    coverage_rows: List[CoverageRow]
    acceptance: List[AcceptanceCheck]
    elapsed: float = 0.0

    @property
    def failures(self) -> List[ReplicationRecord]:
        return [record for record in self.records if record.failed]

    @property
    def all_passed(self) -> bool:
        return all(check.passed is not False for check in self.acceptance)

    def summary(self) -> Dict[str, Any]:
        """Plan-level JSON summary; free of timings so reruns compare equal."""
        return {
            'replications': self.plan.replications,
            'seed': self.plan.seed,
            'records': len(self.records),
            'failures': len(self.failures),
            'failure_messages': sorted({record.failure for record in self.failures}),
            'coverage': [row.__dict__ for row in self.coverage_rows],
            'acceptance': [{'name': c.name, 'status': c.status, 'detail': c.detail} for c in self.acceptance],
            'all_passed': self.all_passed,
        }


def coverage_table(records: Sequence[ReplicationRecord]) -> List[CoverageRow]:
    rows = []
    deltas = sorted({record.delta for record in records})
    for lemma, metric in BOUND_METRICS.items():
        for delta in deltas:
            subset = [record for record in records if record.delta == delta]
            for stratum in STRATA + ('all',):
                try:
                    result = coverage(subset, metric, lemma, stratum)
                except PlanError:
                    continue
                rows.append(CoverageRow(lemma=lemma, metric=metric, stratum=stratum, delta=delta,
                                        passed=result.passed, total=result.total, fraction=result.fraction,
                                        standard_error=result.standard_error, target=1.0 - delta,
                                        meets=result.meets(1.0 - delta)))
    return rows


def _radius_checks(plan: ExperimentPlan, records: Sequence[ReplicationRecord]) -> List[AcceptanceCheck]:
    checks = []
    base = [r for r in records if not r.failed and r.pair_index == 0 and r.radius
            and r.tau_policy == str(plan.tau[0])]
    for delta in sorted({r.delta for r in base}):
        upper = [r.metrics['sup_radius'] <= r.radius['R_k'] for r in base
                 if r.delta == delta and r.radius['upper_applicable']]
        lower = [r.metrics['inf_radius'] >= r.radius['underline_R_k'] for r in base
                 if r.delta == delta and r.radius['lower_applicable'] and r.radius['underline_R_k'] is not None]
        for name, passes in (('radius_upper', upper), ('radius_lower', lower)):
            if not passes:
                checks.append(AcceptanceCheck(f'{name}[delta={delta:g}]', None, 'no admissible records'))
                continue
            result = coverage_fraction(passes)
            checks.append(AcceptanceCheck(
                f'{name}[delta={delta:g}]', result.meets(1.0 - delta),
                f'{result.passed}/{result.total} = {result.fraction:.4f} (target {1 - delta:.4f})'))
    return checks


def acceptance_checks(plan: ExperimentPlan, records: Sequence[ReplicationRecord],
                      rows: Sequence[CoverageRow]) -> List[AcceptanceCheck]:
    checks = []
    if 'coverage' in plan.acceptance:
        for row in rows:
            if row.stratum != LEMMA_STRATUM[row.lemma]:
                continue
            name = f'coverage:{row.lemma}[delta={row.delta:g}]'
            checks.append(AcceptanceCheck(
                name, row.meets,
                f'{row.passed}/{row.total} = {row.fraction:.4f} +/- {row.standard_error:.4f} '
                f'(target {row.target:.4f})'))
        covered = {(row.lemma, row.delta) for row in rows if row.stratum == LEMMA_STRATUM[row.lemma]}
        for lemma in BOUND_METRICS:
            for delta in plan.delta:
                if (lemma, delta) not in covered:
                    checks.append(AcceptanceCheck(f'coverage:{lemma}[delta={delta:g}]', None,
                                                  'no records with passing conditions'))
    if 'davis_kahan' in plan.acceptance:
        measured = [r for r in records if not r.failed and r.davis_kahan]
        violations = sum(1 for r in measured if not r.davis_kahan['holds'])
        checks.append(AcceptanceCheck('davis_kahan', violations == 0 if measured else None,
                                      f'{violations} violations in {len(measured)} records'))
    if 'radius' in plan.acceptance and records:
        checks.extend(_radius_checks(plan, records))
    return checks


def run_plan(plan: ExperimentPlan, workers: Optional[int] = None) -> ExperimentResult:
    """Run every replication of a plan; output depends only on the plan."""
    workers = plan.workers if workers is None else workers
    start = time.perf_counter()
    job = functools.partial(run_replication, plan)
    logger.info("running %d replications over N=%s (workers=%d)", plan.replications, plan.N, workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            batches = list(executor.map(job, range(plan.replications)))
    else:
        batches = [job(rep) for rep in range(plan.replications)]
    records = sorted((record for batch in batches for record in batch), key=ReplicationRecord.sort_key)

    rows = coverage_table(records)
    checks = acceptance_checks(plan, records, rows)
    elapsed = time.perf_counter() - start
    failed = sum(1 for record in records if record.failed)
    logger.info("finished %d records in %.1fs (%d failed)", len(records), elapsed, failed)
    return ExperimentResult(plan=plan, records=records, coverage_rows=rows, acceptance=checks, elapsed=elapsed)


@dataclass
class SweepResult:
    metric: str
    slope: RateSlope
    experiment: ExperimentResult
    expected_exponent: float

    def rows(self) -> List[Dict[str, Any]]:
        return [{'N': n, 'k': optimal_k(n, self.experiment.plan.model.d,
                                         self.experiment.plan.model.rho or 1.0).k, 'median': m}
                for n, m in zip(self.slope.N, self.slope.medians)]


def run_sweep(plan: ExperimentPlan, metric: str, workers: Optional[int] = None) -> SweepResult:
    """Medians over an N-grid with k = optimal_k(N), then the log-log slope."""
    metric = resolve_metric(metric)
    if len(set(plan.N)) < MIN_SLOPE_POINTS:
        raise PlanError(f"sweep needs at least {MIN_SLOPE_POINTS} values of N, got {len(set(plan.N))}")
    sweep_plan = plan.model_copy(update={'k': ['optimal']})
    experiment = run_plan(sweep_plan, workers)
    slope = rate_slope(experiment.records, metric)
    return SweepResult(metric=metric, slope=slope, experiment=experiment,
                       expected_exponent=-1.0 / (plan.model.d + 2))
