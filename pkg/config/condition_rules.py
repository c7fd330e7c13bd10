"""Lemma condition registry.

Each rule compares a left-hand side with a right-hand side computed from a
bound context (see core.bounds.BoundContext). Rules never raise on failure;
the engine records both sides so users see how far a condition misses.
"""

import math
from typing import Callable, Dict, List

from config.settings import ZERO_SINGULAR_VALUE

RELATIONS = {
    '<=': lambda lhs, rhs: lhs <= rhs,
    '>=': lambda lhs, rhs: lhs >= rhs,
    '<': lambda lhs, rhs: lhs < rhs,
    '>': lambda lhs, rhs: lhs > rhs,
}

LEMMA_ORDER = [
    'radius',
    'boundLaplacians',
    'bdlocalgpsize',
    'bdlocaldegree',
    'integr',
    'bdsingularvalue',
    'clusteringConstraintDeterm',
    'clusteringConstraintIntegr',
    'clustRate',
    'rate_BHat_g',
    'rate_piHat',
    'rate_BHat',
]


class ConditionRule:
    """Individual lemma condition."""

    def __init__(self, rule_id: str, description: str, lemma: str,
                 lhs: Callable, rhs: Callable, relation: str = '<=', gating: bool = True):
        if relation not in RELATIONS:
            raise ValueError(f"unknown relation {relation!r}")
        self.rule_id = rule_id
        self.description = description
        self.lemma = lemma
        self.lhs = lhs
        self.rhs = rhs
        self.relation = relation
        self.gating = gating

    def compare(self, lhs: float, rhs: float) -> bool:
        if math.isnan(lhs) or math.isnan(rhs):
            return False
        return RELATIONS[self.relation](lhs, rhs)


def _ln(value: float) -> float:
    return math.log(value) if value > 0 else -math.inf


def _conditional_rules(lemma: str, m1: int, m2: int, m3: int, m4: int) -> List[ConditionRule]:
    """Degree, k-range and group-floor conditions on N_h-based floors."""
    return [
        ConditionRule(
            f'{lemma}.1', f'Delta * min_h floor_h + tau >= 3 ln({m1} k / delta)', lemma,
            lambda ctx: ctx.Delta * ctx.min_floor + ctx.tau,
            lambda ctx: 3.0 * _ln(m1 * ctx.k / ctx.delta), '>='),
        ConditionRule(
            f'{lemma}.2', f'k >= max(12 d ln({m2} G N / delta), 24 d ln({m3} N / delta))', lemma,
            lambda ctx: float(ctx.k),
            lambda ctx: max(12.0 * ctx.d * _ln(m2 * ctx.G * ctx.N / ctx.delta),
                            24.0 * ctx.d * _ln(m3 * ctx.N / ctx.delta)), '>='),
        ConditionRule(
            f'{lemma}.3', 'k <= min(8 T^d V_d Ubar_X N, T^d V_d b_X c N / 2)', lemma,
            lambda ctx: float(ctx.k),
            lambda ctx: min(8.0 * ctx.T ** ctx.d * ctx.V_d * ctx.U_bar_X * ctx.N,
                            0.5 * ctx.T ** ctx.d * ctx.V_d * ctx.b_X * ctx.c * ctx.N), '<='),
        ConditionRule(
            f'{lemma}.4', f'for all h: (c/16)(N_h/N)(b_X/Ubar_X) k - 24 d ln({m4} G N_h / delta) - 1 >= 0', lemma,
            lambda ctx: ctx.floor_slack(m4),
            lambda ctx: 0.0, '>='),
    ]


def _marginal_rules(lemma: str, m1: int, m2: int, m3: int, m4: int) -> List[ConditionRule]:
    """Same shape as the conditional rules, on the pi_min-based floor."""
    return [
        ConditionRule(
            f'{lemma}.1', f'Delta * floor_pi + tau >= 3 ln({m1} k / delta)', lemma,
            lambda ctx: ctx.Delta * ctx.pi_floor + ctx.tau,
            lambda ctx: 3.0 * _ln(m1 * ctx.k / ctx.delta), '>='),
        ConditionRule(
            f'{lemma}.2', f'k >= max(12 d ln({m2} G N / delta), 24 d ln({m3} N / delta))', lemma,
            lambda ctx: float(ctx.k),
            lambda ctx: max(12.0 * ctx.d * _ln(m2 * ctx.G * ctx.N / ctx.delta),
                            24.0 * ctx.d * _ln(m3 * ctx.N / ctx.delta)), '>='),
        ConditionRule(
            f'{lemma}.3', 'k <= min(8 T^d V_d Ubar_X N, T^d V_d b_X c N / 2)', lemma,
            lambda ctx: float(ctx.k),
            lambda ctx: min(8.0 * ctx.T ** ctx.d * ctx.V_d * ctx.U_bar_X * ctx.N,
                            0.5 * ctx.T ** ctx.d * ctx.V_d * ctx.b_X * ctx.c * ctx.N), '<='),
        ConditionRule(
            f'{lemma}.4', f'pi_min c b_X k / (32 Ubar_X) >= 24 d ln({m4} G N / delta) + 1', lemma,
            lambda ctx: ctx.pi_floor_real,
            lambda ctx: 24.0 * ctx.d * _ln(m4 * ctx.G * ctx.N / ctx.delta) + 1.0, '>='),
    ]


def _constraint_rule(rule_id: str, lemma: str, divisor: float, marginal: bool) -> ConditionRule:
    if marginal:
        return ConditionRule(
            rule_id, f'pi-floor clustering constraint at delta/{divisor:g}', lemma,
            lambda ctx: ctx.constraint_lhs(24, ctx.pi_floor, ctx.delta / divisor),
            lambda ctx: ctx.constraint_rhs(ctx.pi_floor), '<')
    return ConditionRule(
        rule_id, f'clustering constraint at delta/{divisor:g}', lemma,
        lambda ctx: ctx.constraint_lhs(8, ctx.min_floor, ctx.delta / divisor),
        lambda ctx: ctx.constraint_rhs(ctx.min_floor), '<')


def _group_size_rules(lemma: str) -> List[ConditionRule]:
    return [
        ConditionRule(
            f'{lemma}.1', 'k >= 12 d ln(24 G N / delta)', lemma,
            lambda ctx: float(ctx.k),
            lambda ctx: 12.0 * ctx.d * _ln(24 * ctx.G * ctx.N / ctx.delta), '>='),
        ConditionRule(
            f'{lemma}.2', 'k <= 8 T^d V_d Ubar_X N', lemma,
            lambda ctx: float(ctx.k),
            lambda ctx: 8.0 * ctx.T ** ctx.d * ctx.V_d * ctx.U_bar_X * ctx.N, '<='),
        ConditionRule(
            f'{lemma}.3', 'for all h: (c/16)(N_h/N)(b_X/Ubar_X) k - 24 d ln(24 G N_h / delta) - 1 >= 0', lemma,
            lambda ctx: ctx.floor_slack(24),
            lambda ctx: 0.0, '>='),
    ]


def _build_rules() -> Dict[str, ConditionRule]:
    rules: List[ConditionRule] = [
        ConditionRule('radius.1', 'k >= 24 d ln(12 N / delta) (upper envelope)', 'radius',
                      lambda ctx: float(ctx.k),
                      lambda ctx: 24.0 * ctx.d * _ln(12 * ctx.N / ctx.delta), '>='),
        ConditionRule('radius.2', 'k <= T^d N b_X c V_d / 2 (upper envelope)', 'radius',
                      lambda ctx: float(ctx.k),
                      lambda ctx: ctx.T ** ctx.d * ctx.N * ctx.b_X * ctx.c * ctx.V_d / 2.0, '<='),
        ConditionRule('radius.3', 'k >= 12 d ln(12 N / delta) (lower envelope)', 'radius',
                      lambda ctx: float(ctx.k),
                      lambda ctx: 12.0 * ctx.d * _ln(12 * ctx.N / ctx.delta), '>='),
        ConditionRule('boundLaplacians.1', 'sup_x r_k(x) <= R_k', 'boundLaplacians',
                      lambda ctx: ctx.sup_radius_or_nan,
                      lambda ctx: ctx.R_k, '<='),
        ConditionRule('boundLaplacians.2', '3 ln(8 k / delta) <= d_min + tau', 'boundLaplacians',
                      lambda ctx: 3.0 * _ln(8 * ctx.k / ctx.delta),
                      lambda ctx: ctx.d_min_or_nan + ctx.tau, '<='),
    ]
    rules += _group_size_rules('bdlocalgpsize')
    rules += _group_size_rules('bdlocaldegree')
    rules += _conditional_rules('integr', 24, 72, 36, 72)
    rules.append(ConditionRule('bdsingularvalue.1', 'sigma_G(B(x, x\')) > 0', 'bdsingularvalue',
                               lambda ctx: ctx.sigma_G_B, lambda ctx: ZERO_SINGULAR_VALUE, '>'))
    rules.append(ConditionRule('bdsingularvalue.2', 'min_h floor_h >= 1', 'bdsingularvalue',
                               lambda ctx: float(ctx.min_floor), lambda ctx: 1.0, '>='))
    rules.append(_constraint_rule('clusteringConstraintDeterm.1', 'clusteringConstraintDeterm', 1, False))
    rules.append(ConditionRule(
        'clusteringConstraintDeterm.implied', 'Laplacian bound < lambda_G lower bound / (16 sqrt(2G))',
        'clusteringConstraintDeterm',
        lambda ctx: ctx.constraint_lhs(8, ctx.min_floor, ctx.delta),
        lambda ctx: ctx.implied_rhs(ctx.min_floor), '<', gating=False))
    rules.append(_constraint_rule('clusteringConstraintIntegr.1', 'clusteringConstraintIntegr', 1, True))
    rules.append(ConditionRule(
        'clusteringConstraintIntegr.implied', 'Laplacian bound < lambda_G lower bound / (16 sqrt(2G)), pi floor',
        'clusteringConstraintIntegr',
        lambda ctx: ctx.constraint_lhs(24, ctx.pi_floor, ctx.delta),
        lambda ctx: ctx.implied_rhs(ctx.pi_floor), '<', gating=False))

    rules += _conditional_rules('clustRate', 24, 72, 36, 72)
    rules.append(_constraint_rule('clustRate.5', 'clustRate', 3, False))
    rules += _conditional_rules('rate_BHat_g', 48, 144, 72, 144)
    rules.append(_constraint_rule('rate_BHat_g.5', 'rate_BHat_g', 6, False))

    rules += _marginal_rules('rate_piHat', 72, 216, 108, 216)
    rules += [
        _constraint_rule('rate_piHat.5', 'rate_piHat', 3, True),
        ConditionRule('rate_piHat.6', '2^8 d ln(24 / delta) ln N <= k', 'rate_piHat',
                      lambda ctx: 256.0 * ctx.d * _ln(24 / ctx.delta) * _ln(ctx.N),
                      lambda ctx: float(ctx.k), '<='),
        ConditionRule('rate_piHat.7', 'k <= c V_d b_X T^d N / 2', 'rate_piHat',
                      lambda ctx: float(ctx.k),
                      lambda ctx: ctx.c * ctx.V_d * ctx.b_X * ctx.T ** ctx.d * ctx.N / 2.0, '<='),
        ConditionRule('rate_piHat.8', 'N >= 8 ln(3G / delta) / pi_min^2', 'rate_piHat',
                      lambda ctx: float(ctx.N),
                      lambda ctx: ctx.pi_min_ratio(3), '>='),
    ]
    rules += _marginal_rules('rate_BHat', 96, 288, 144, 288)
    rules += [
        _constraint_rule('rate_BHat.5', 'rate_BHat', 12, True),
        ConditionRule('rate_BHat.6', 'N >= 8 ln(2G / delta) / pi_min^2', 'rate_BHat',
                      lambda ctx: float(ctx.N),
                      lambda ctx: ctx.pi_min_ratio(2), '>='),
    ]
    return {rule.rule_id: rule for rule in rules}


CONDITION_RULES: Dict[str, ConditionRule] = _build_rules()


def get_rules_by_lemma(lemma: str) -> List[ConditionRule]:
    """Get all condition rules for a specific lemma, in registry order."""
    return [rule for rule in CONDITION_RULES.values() if rule.lemma == lemma]


def get_all_lemmas() -> List[str]:
    return list(LEMMA_ORDER)
