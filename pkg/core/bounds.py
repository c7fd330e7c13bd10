"""Finite-sample bounds and lemma conditions evaluated as numbers."""

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from config.condition_rules import ConditionRule, get_all_lemmas, get_rules_by_lemma
from config.settings import ZERO_SINGULAR_VALUE
from core.errors import ModelSpecError
from utils.helpers import to_jsonable, unit_ball_volume

logger = logging.getLogger(__name__)

INF = math.inf


@dataclass
class BoundInputs:
    """Everything a bound needs; B_matrix is B(x, x') at the query pair."""
    N: int
    k: int
    d: int
    G: int
    delta: float
    tau: float
    c: float
    T: float
    b_X: float
    U_X: float
    U_bar_X: float
    l_B: float
    l_pi: float
    Delta: float
    pi_min: float
    B_matrix: np.ndarray
    b_bar_X: Optional[float] = None
    N_h: Optional[Sequence[float]] = None
    d_min: Optional[float] = None
    sup_radius: Optional[float] = None
    rho: float = 1.0

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ModelSpecError(f"delta={self.delta} must lie in (0, 1)")
        if self.N < 1 or not 1 <= self.k <= self.N:
            raise ModelSpecError(f"need 1 <= k <= N, got k={self.k}, N={self.N}")
        if self.tau < 0:
            raise ModelSpecError(f"tau must be >= 0, got {self.tau}")
        self.B_matrix = np.asarray(self.B_matrix, dtype=float)

    @classmethod
    def from_spec(cls, spec, N: int, k: int, delta: float, tau: float, x, xp,
                  N_h: Optional[Sequence[float]] = None, d_min: Optional[float] = None,
                  sup_radius: Optional[float] = None) -> 'BoundInputs':
        if not spec.bounds_enabled:
            raise ModelSpecError(f"bound evaluation needs constants {spec.constants.missing()}")
        const = spec.constants
        return cls(N=int(N), k=int(k), d=spec.d, G=spec.G, delta=float(delta), tau=float(tau),
                   c=const.c, T=const.T, b_X=const.b_X, U_X=const.U_X, U_bar_X=const.U_bar_X,
                   l_B=const.l_B, l_pi=const.l_pi, Delta=const.Delta, pi_min=const.pi_min,
                   b_bar_X=const.b_bar_X, rho=const.rho,
                   B_matrix=spec.B.matrix(np.asarray(x, dtype=float), np.asarray(xp, dtype=float)),
                   N_h=None if N_h is None else [float(v) for v in N_h],
                   d_min=d_min, sup_radius=sup_radius)

    def with_delta(self, delta: float) -> 'BoundInputs':
        return replace(self, delta=delta)

    @property
    def V_d(self) -> float:
        return unit_ball_volume(self.d)

    @property
    def R_k(self) -> float:
        scale = self.N * self.b_X * self.c * self.V_d
        return (2.0 * self.k / scale) ** (1.0 / self.d) if scale > 0 else INF

    @property
    def underline_R_k(self) -> Optional[float]:
        excess = self.k - 12.0 * self.d * math.log(12.0 * self.N / self.delta)
        if excess < 0:
            return None
        return (excess / (4.0 * self.N * self.U_bar_X * self.V_d)) ** (1.0 / self.d)

    @property
    def B_max(self) -> float:
        return float(np.max(np.abs(self.B_matrix)))

    @property
    def sigma_G_B(self) -> float:
        values = scipy.linalg.svdvals(self.B_matrix)
        return float(values[self.G - 1]) if values.size >= self.G else 0.0


@dataclass
class GroupFloors:
    """floor((c/16)(N_h/N)(b_X/Ubar_X) k) per community, exact."""
    values: List[int]
    real: List[float]
    minimum: int
    surrogate: bool


@dataclass
class SigmaLower:
    value: float
    sigma_G_B: float
    B_max: float
    rank_deficient: bool


@dataclass
class OptimalK:
    k: int
    k_real: float
    rate: float
    exponent: float


@dataclass
class ConditionCheck:
    rule_id: str
    description: str
    lemma: str
    lhs: Optional[float]
    relation: str
    rhs: Optional[float]
    passed: bool
    gating: bool = True
    details: str = ""


@dataclass
class LemmaRecord:
    lemma: str
    value: float
    terms: Dict[str, Optional[float]] = field(default_factory=dict)
    conditions: List[ConditionCheck] = field(default_factory=list)

    @property
    def applicable(self) -> bool:
        return all(check.passed for check in self.conditions if check.gating)

    @property
    def vacuous(self) -> bool:
        return not math.isfinite(self.value)

    def failed_conditions(self) -> List[ConditionCheck]:
        return [check for check in self.conditions if check.gating and not check.passed]

    def to_dict(self) -> Dict[str, Any]:
        return to_jsonable({
            'lemma': self.lemma,
            'value': self.value,
            'applicable': self.applicable,
            'vacuous': self.vacuous,
            'terms': self.terms,
            'conditions': [asdict(check) for check in self.conditions],
        })


@dataclass
class BoundSummary:
    """Overall evaluation summary."""
    total_conditions: int
    passed: int
    failed: int
    lemmas_total: int
    lemmas_applicable: int
    vacuous_lemmas: List[str]
    flags: Dict[str, bool]


@dataclass
class BoundReport:
    inputs: Dict[str, Any]
    records: Dict[str, LemmaRecord]
    summary: BoundSummary

    def value(self, lemma: str) -> float:
        return self.records[lemma].value

    def applicable(self, lemma: str) -> bool:
        return self.records[lemma].applicable

    def to_dict(self) -> Dict[str, Any]:
        return to_jsonable({
            'inputs': self.inputs,
            'summary': asdict(self.summary),
            'lemmas': {name: record.to_dict() for name, record in self.records.items()},
        })

    def summary_rows(self) -> List[Dict[str, Any]]:
        """One row per lemma for the CSV summary."""
        rows = []
        for name, record in self.records.items():
            rows.append({
                'lemma': name,
                'value': record.value,
                'applicable': record.applicable,
                'vacuous': record.vacuous,
                'conditions': len(record.conditions),
                'failed_conditions': ';'.join(check.rule_id for check in record.failed_conditions()),
            })
        return rows


# ---------------------------------------------------------------------------
# Scalar pieces
# ---------------------------------------------------------------------------

def _community_sizes(inputs: BoundInputs) -> Tuple[List[float], bool]:
    if inputs.N_h is not None:
        return [float(v) for v in inputs.N_h], False
    return [inputs.pi_min * inputs.N / 2.0] * inputs.G, True


def _density_ratio(inputs: BoundInputs) -> Fraction:
    """b_X / Ubar_X exactly; 0 when the density envelope is unbounded."""
    if not math.isfinite(inputs.U_bar_X):
        return Fraction(0)
    return Fraction(inputs.b_X) / Fraction(inputs.U_bar_X)


def floor_group_size(inputs: BoundInputs) -> GroupFloors:
    """Exact floors; without N_h every community uses the pi_min N / 2 surrogate."""
    sizes, surrogate = _community_sizes(inputs)
    scale = Fraction(inputs.c) / 16 * _density_ratio(inputs) * inputs.k / inputs.N
    exact = [scale * Fraction(size) for size in sizes]
    values = [math.floor(value) for value in exact]
    return GroupFloors(values=values, real=[float(value) for value in exact],
                       minimum=min(values) if values else 0, surrogate=surrogate)


def pi_floor(inputs: BoundInputs) -> Tuple[int, float]:
    """floor(pi_min c b_X k / (32 Ubar_X)) and its unfloored value."""
    exact = Fraction(inputs.pi_min) * Fraction(inputs.c) * _density_ratio(inputs) * inputs.k / 32
    return math.floor(exact), float(exact)


def laplacian_bound_terms(inputs: BoundInputs, degree: float, log_multiplier: float = 8,
                          delta: Optional[float] = None) -> Tuple[float, float]:
    """(variance, bias) parts of the Laplacian deviation bound at the given degree."""
    delta = inputs.delta if delta is None else delta
    denom = degree + inputs.tau
    if not denom > 0 or not math.isfinite(denom):
        return INF, INF
    variance = 4.0 * math.sqrt(3.0 * math.log(log_multiplier * inputs.k / delta) / denom)
    if inputs.l_B == 0:
        return variance, 0.0
    ratio = 2.0 * inputs.k * inputs.l_B * inputs.R_k / denom
    return variance, ratio * (ratio + 3.0)


def laplacian_bound(inputs: BoundInputs, degree: float, log_multiplier: float = 8,
                    delta: Optional[float] = None) -> float:
    """4 sqrt(3 ln(m k / delta) / (D + tau)) + r (r + 3), r = 2 k l_B R_k / (D + tau).

    degree is d_min for the conditional form; m = 8 there.
    """
    variance, bias = laplacian_bound_terms(inputs, degree, log_multiplier, delta)
    return variance + bias


def integrated_laplacian_bound(inputs: BoundInputs, floor: Optional[int] = None,
                               log_multiplier: float = 24, delta: Optional[float] = None) -> float:
    """Laplacian bound with Delta * min_h floor_h in place of d_min."""
    floor = floor_group_size(inputs).minimum if floor is None else floor
    return laplacian_bound(inputs, inputs.Delta * floor, log_multiplier, delta)


def sigma_G_lower(inputs: BoundInputs, B_matrix: Optional[np.ndarray] = None,
                  group_floor: Optional[int] = None) -> SigmaLower:
    """sigma_G(B) * min_h floor_h / (||B||_max k + tau); 0 when B is rank deficient."""
    B = inputs.B_matrix if B_matrix is None else np.asarray(B_matrix, dtype=float)
    values = scipy.linalg.svdvals(B)
    sigma = float(values[inputs.G - 1]) if values.size >= inputs.G else 0.0
    B_max = float(np.max(np.abs(B)))
    floor = floor_group_size(inputs).minimum if group_floor is None else group_floor
    rank_deficient = sigma <= ZERO_SINGULAR_VALUE
    denom = B_max * inputs.k + inputs.tau
    value = 0.0 if rank_deficient or denom <= 0 else sigma * floor / denom
    return SigmaLower(value=float(value), sigma_G_B=sigma, B_max=B_max, rank_deficient=rank_deficient)


def optimal_k(N: int, d: int, rho: float = 1.0) -> OptimalK:
    """k ~ (N^2 / rho^d)^(1/(d+2)), with implied rate (rho N)^(-1/(d+2))."""
    if rho <= 0:
        raise ModelSpecError(f"rho must be > 0, got {rho}")
    exponent = 1.0 / (d + 2)
    k_real = (N ** 2 / rho ** d) ** exponent
    k = int(min(max(round(k_real), 1), N))
    return OptimalK(k=k, k_real=float(k_real), rate=float((rho * N) ** (-exponent)), exponent=-exponent)


# ---------------------------------------------------------------------------
# Context used by condition rules and lemma formulas
# ---------------------------------------------------------------------------

class BoundContext:
    """Derived quantities for one BoundInputs; unknown attributes fall through to inputs."""

    def __init__(self, inputs: BoundInputs):
        self.inputs = inputs
        self.floors = floor_group_size(inputs)
        self.min_floor = self.floors.minimum
        self.pi_floor, self.pi_floor_real = pi_floor(inputs)
        self.V_d = inputs.V_d
        self.R_k = inputs.R_k
        self.underline_R_k = inputs.underline_R_k
        self.sigma_G_B = inputs.sigma_G_B
        self.B_max = inputs.B_max

    def __getattr__(self, name):
        if name.startswith('__') or name == 'inputs':
            raise AttributeError(name)
        return getattr(self.inputs, name)

    @property
    def sup_radius_or_nan(self) -> float:
        return math.nan if self.inputs.sup_radius is None else float(self.inputs.sup_radius)

    @property
    def d_min_or_nan(self) -> float:
        return math.nan if self.inputs.d_min is None else float(self.inputs.d_min)

    def floor_slack(self, multiplier: float) -> float:
        """min_h of (unfloored floor_h) - 24 d ln(m G N_h / delta) - 1."""
        sizes, _ = _community_sizes(self.inputs)
        slacks = []
        for size, real in zip(sizes, self.floors.real):
            if size <= 0:
                return -INF
            slacks.append(real - 24.0 * self.d * math.log(multiplier * self.G * size / self.delta) - 1.0)
        return min(slacks) if slacks else -INF

    def pi_min_ratio(self, multiplier: float) -> float:
        if self.pi_min <= 0:
            return INF
        return 8.0 * math.log(multiplier * self.G / self.delta) / self.pi_min ** 2

    def lap(self, log_multiplier: float, degree: float, delta: Optional[float] = None) -> float:
        return laplacian_bound(self.inputs, degree, log_multiplier, delta)

    def constraint_lhs(self, log_multiplier: float, floor: int, delta: float) -> float:
        return self.lap(log_multiplier, self.Delta * floor, delta)

    def sigma_lower(self, floor: int) -> float:
        return sigma_G_lower(self.inputs, group_floor=floor).value

    def constraint_rhs(self, floor: int) -> float:
        return 16.0 * math.sqrt(2.0 * self.G) * self.sigma_lower(floor)

    def implied_rhs(self, floor: int) -> float:
        return self.sigma_lower(floor) / (16.0 * math.sqrt(2.0 * self.G))

    def misclustering_prefactor(self, multiplier: float, floor: int, with_k_terms: bool = False) -> float:
        if self.sigma_G_B <= ZERO_SINGULAR_VALUE or floor <= 0:
            return INF
        value = multiplier * self.G * (self.B_max * self.k + self.tau) ** 2 / (self.sigma_G_B ** 2 * floor ** 2)
        if with_k_terms:
            value *= self.k / floor + self.k ** 2 / floor ** 2
        return value


def _finite_sum(*parts: float) -> float:
    total = sum(parts)
    return INF if math.isnan(total) else total


def _radius(ctx: BoundContext):
    return ctx.R_k, {'R_k': ctx.R_k, 'underline_R_k': ctx.underline_R_k}


def _bound_laplacians(ctx: BoundContext):
    if ctx.inputs.d_min is None:
        return INF, {'variance': INF, 'bias': INF}
    variance, bias = laplacian_bound_terms(ctx.inputs, ctx.inputs.d_min, 8)
    return _finite_sum(variance, bias), {'variance': variance, 'bias': bias}


def _group_size(ctx: BoundContext):
    terms = {f'floor_{h}': float(v) for h, v in enumerate(ctx.floors.values)}
    terms['surrogate'] = float(ctx.floors.surrogate)
    return float(ctx.min_floor), terms


def _local_degree(ctx: BoundContext):
    return float(ctx.Delta * ctx.min_floor), {'min_floor': float(ctx.min_floor)}


def _integr(ctx: BoundContext):
    variance, bias = laplacian_bound_terms(ctx.inputs, ctx.Delta * ctx.min_floor, 24)
    return _finite_sum(variance, bias), {'variance': variance, 'bias': bias}


def _singular_value(ctx: BoundContext):
    lower = sigma_G_lower(ctx.inputs, group_floor=ctx.min_floor)
    return lower.value, {'sigma_G_B': lower.sigma_G_B, 'B_max': lower.B_max,
                         'rank_deficient': float(lower.rank_deficient)}


def _constraint_determ(ctx: BoundContext):
    lhs = ctx.constraint_lhs(8, ctx.min_floor, ctx.delta)
    return lhs, {'printed_rhs': ctx.constraint_rhs(ctx.min_floor), 'implied_rhs': ctx.implied_rhs(ctx.min_floor)}


def _constraint_integr(ctx: BoundContext):
    lhs = ctx.constraint_lhs(24, ctx.pi_floor, ctx.delta)
    return lhs, {'printed_rhs': ctx.constraint_rhs(ctx.pi_floor), 'implied_rhs': ctx.implied_rhs(ctx.pi_floor)}


def _clust_rate(ctx: BoundContext):
    prefactor = ctx.misclustering_prefactor(512, ctx.min_floor)
    value = _finite_sum(prefactor * ctx.lap(24, ctx.Delta * ctx.min_floor) ** 2)
    return value, {'misclustering': value}


def _rate_BHat_g(ctx: BoundContext):
    prefactor = ctx.misclustering_prefactor(1024, ctx.min_floor, with_k_terms=True)
    misclustering = _finite_sum(prefactor * ctx.lap(48, ctx.Delta * ctx.min_floor) ** 2)
    bias = 2.0 * ctx.l_B * ctx.R_k if ctx.l_B > 0 else 0.0
    variance = math.sqrt(2.0 * math.log(4.0 / ctx.delta)) / ctx.min_floor if ctx.min_floor > 0 else INF
    return _finite_sum(misclustering, bias, variance), {
        'misclustering': misclustering, 'bias': bias, 'variance': variance}


def _rate_piHat(ctx: BoundContext):
    prefactor = ctx.misclustering_prefactor(512, ctx.pi_floor)
    misclustering = _finite_sum(prefactor * ctx.lap(72, ctx.Delta * ctx.pi_floor) ** 2)
    bias = ctx.l_pi * ctx.R_k if ctx.l_pi > 0 else 0.0
    variance = 2.0 * math.sqrt((ctx.d * math.log(ctx.N) + math.log(6.0 / ctx.delta)) / ctx.k)
    return _finite_sum(misclustering, bias, variance), {
        'misclustering': misclustering, 'bias': bias, 'variance': variance}


def _rate_BHat(ctx: BoundContext):
    prefactor = ctx.misclustering_prefactor(1024, ctx.pi_floor, with_k_terms=True)
    misclustering = _finite_sum(prefactor * ctx.lap(48, ctx.Delta * ctx.pi_floor) ** 2)
    bias = 2.0 * ctx.l_B * ctx.R_k if ctx.l_B > 0 else 0.0
    variance = math.sqrt(2.0 * math.log(4.0 / ctx.delta)) / ctx.pi_floor if ctx.pi_floor > 0 else INF
    return _finite_sum(misclustering, bias, variance), {
        'misclustering': misclustering, 'bias': bias, 'variance': variance}


LEMMA_FORMULAS: Dict[str, Callable[[BoundContext], Tuple[float, Dict[str, Optional[float]]]]] = {
    'radius': _radius,
    'boundLaplacians': _bound_laplacians,
    'bdlocalgpsize': _group_size,
    'bdlocaldegree': _local_degree,
    'integr': _integr,
    'bdsingularvalue': _singular_value,
    'clusteringConstraintDeterm': _constraint_determ,
    'clusteringConstraintIntegr': _constraint_integr,
    'clustRate': _clust_rate,
    'rate_BHat_g': _rate_BHat_g,
    'rate_piHat': _rate_piHat,
    'rate_BHat': _rate_BHat,
}


class BoundEngine:
    """Evaluates every registered condition and bound for one BoundInputs."""

    def evaluate(self, inputs: BoundInputs) -> BoundReport:
        context = BoundContext(inputs)
        records = {lemma: self._evaluate_lemma(context, lemma) for lemma in get_all_lemmas()}
        summary = self._generate_summary(context, records)
        logger.debug("bounds evaluated: %d/%d lemmas applicable",
                     summary.lemmas_applicable, summary.lemmas_total)
        return BoundReport(inputs=self._describe_inputs(inputs), records=records, summary=summary)

    def evaluate_lemma(self, inputs: BoundInputs, lemma: str) -> LemmaRecord:
        return self._evaluate_lemma(BoundContext(inputs), lemma)

    def _evaluate_lemma(self, context: BoundContext, lemma: str) -> LemmaRecord:
        checks = [self._execute_rule(rule, context) for rule in get_rules_by_lemma(lemma)]
        try:
            value, terms = LEMMA_FORMULAS[lemma](context)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            logger.warning("bound %s could not be evaluated: %s", lemma, exc)
            value, terms = INF, {'error': None}
        value = INF if value is None or math.isnan(value) else float(value)
        return LemmaRecord(lemma=lemma, value=value, terms=terms, conditions=checks)

    def _execute_rule(self, rule: ConditionRule, context: BoundContext) -> ConditionCheck:
        try:
            lhs = float(rule.lhs(context))
            rhs = float(rule.rhs(context))
            passed = rule.compare(lhs, rhs)
            details = ""
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            lhs, rhs, passed = math.nan, math.nan, False
            details = f"Error evaluating condition: {exc}"
        if math.isnan(lhs) or math.isnan(rhs):
            details = details or "quantity not available"
        return ConditionCheck(rule_id=rule.rule_id, description=rule.description, lemma=rule.lemma,
                              lhs=None if math.isnan(lhs) else lhs, relation=rule.relation,
                              rhs=None if math.isnan(rhs) else rhs, passed=passed,
                              gating=rule.gating, details=details)

    def _generate_summary(self, context: BoundContext, records: Dict[str, LemmaRecord]) -> BoundSummary:
        checks = [check for record in records.values() for check in record.conditions]
        passed = sum(1 for check in checks if check.passed)
        return BoundSummary(
            total_conditions=len(checks),
            passed=passed,
            failed=len(checks) - passed,
            lemmas_total=len(records),
            lemmas_applicable=sum(1 for record in records.values() if record.applicable),
            vacuous_lemmas=[name for name, record in records.items() if record.vacuous],
            flags={
                'rank_deficient_B': context.sigma_G_B <= ZERO_SINGULAR_VALUE,
                'surrogate_floors': context.floors.surrogate,
                'underline_R_k_undefined': context.underline_R_k is None,
            },
        )

    @staticmethod
    def _describe_inputs(inputs: BoundInputs) -> Dict[str, Any]:
        described = asdict(inputs)
        described['B_matrix'] = np.asarray(inputs.B_matrix).tolist()
        described['R_k'] = inputs.R_k
        described['underline_R_k'] = inputs.underline_R_k
        return described


def misclustering_bound(inputs: BoundInputs) -> LemmaRecord:
    """Misclustering bound with its conditions, including the clustering constraint."""
    return BoundEngine().evaluate_lemma(inputs, 'clustRate')


def estimator_bounds(inputs: BoundInputs) -> Dict[str, LemmaRecord]:
    """Bounds on |B_hat - B| (conditional and pi-floor forms) and |pi_hat - pi|."""
    engine = BoundEngine()
    return {lemma: engine.evaluate_lemma(inputs, lemma) for lemma in ('rate_BHat_g', 'rate_piHat', 'rate_BHat')}
