"""Tables, charts and summaries for bound reports and Monte Carlo experiments."""

from typing import Any, Dict, Optional

import numpy as np
import pandas as pd
import plotly.graph_objects as go

from config.settings import APP_TITLE, RECORD_METRICS
from core.bounds import BoundReport
from core.montecarlo_harness import ExperimentResult, SweepResult
from utils.helpers import format_check_message, get_current_timestamp

STATUS_ICONS = {'PASS': '✅', 'FAIL': '❌', 'SKIPPED': '⏭️'}


class ReportGenerator:
    """Generate experiment reports."""

    def __init__(self, experiment: ExperimentResult, sweep: Optional[SweepResult] = None):
        self.experiment = experiment
        self.sweep = sweep

    def generate_summary_metrics(self) -> Dict[str, Any]:
        """Generate key summary metrics."""
        checks = self.experiment.acceptance
        return {
            'records': len(self.experiment.records),
            'failures': len(self.experiment.failures),
            'acceptance_passed': sum(1 for c in checks if c.passed),
            'acceptance_failed': sum(1 for c in checks if c.passed is False),
            'acceptance_skipped': sum(1 for c in checks if c.passed is None),
            'status': 'PASS' if self.experiment.all_passed else 'FAIL',
        }

    def generate_records_dataframe(self) -> pd.DataFrame:
        """One row per (replication, query pair, N, k, tau, delta)."""
        return pd.DataFrame([record.to_row() for record in self.experiment.records])

    def generate_coverage_dataframe(self) -> pd.DataFrame:
        columns = ['lemma', 'metric', 'stratum', 'delta', 'passed', 'total', 'fraction',
                   'standard_error', 'target', 'meets']
        rows = [row.__dict__ for row in self.experiment.coverage_rows]
        return pd.DataFrame(rows, columns=columns)

    def generate_metric_summary(self) -> pd.DataFrame:
        """Median and spread of each metric per (N, k)."""
        frame = self.generate_records_dataframe()
        if frame.empty:
            return frame
        frame = frame[frame['failure'] == '']
        metrics = [m for m in RECORD_METRICS if m in frame.columns]
        numeric = frame[['N', 'k'] + metrics].apply(pd.to_numeric, errors='coerce')
        numeric = numeric.replace([np.inf, -np.inf], np.nan)
        summary = numeric.groupby(['N', 'k']).agg(['median', 'min', 'max'])
        summary.columns = [f'{metric}_{stat}' for metric, stat in summary.columns]
        return summary.reset_index()

    def create_coverage_chart(self, stratum: str = 'conditional') -> go.Figure:
        """Coverage per bound with the 1 - delta target line."""
        frame = self.generate_coverage_dataframe()
        frame = frame[frame['stratum'] == stratum]
        fig = go.Figure()
        for delta, group in frame.groupby('delta'):
            fig.add_trace(go.Bar(
                name=f'delta={delta:g}', x=group['lemma'], y=group['fraction'],
                error_y=dict(type='data', array=3.0 * group['standard_error']),
            ))
            fig.add_hline(y=1.0 - delta, line_dash='dash', line_color='#dc3545',
                          annotation_text=f'1 - delta = {1 - delta:g}')
        fig.update_layout(
            title=f'Empirical coverage of the bounds ({stratum} stratum)',
            xaxis_title='Bound',
            yaxis_title='Fraction of replications within bound',
            yaxis_range=[0, 1.05],
            barmode='group',
        )
        return fig

    def create_rate_chart(self) -> Optional[go.Figure]:
        """Log-log medians against N with the fitted slope."""
        if self.sweep is None:
            return None
        slope = self.sweep.slope
        N = np.asarray(slope.N, dtype=float)
        fitted = np.exp(slope.intercept) * N ** slope.slope
        fig = go.Figure(data=[
            go.Scatter(x=N, y=slope.medians, mode='markers', name=f'median {self.sweep.metric}',
                       marker_color='#17a2b8'),
            go.Scatter(x=N, y=fitted, mode='lines', name=f'slope {slope.slope:.3f}', line_color='#fd7e14'),
        ])
        fig.update_layout(
            title=f'Rate of {self.sweep.metric} (expected exponent {self.sweep.expected_exponent:.3f})',
            xaxis_title='N', yaxis_title=self.sweep.metric, xaxis_type='log', yaxis_type='log',
        )
        return fig

    def generate_executive_summary(self) -> str:
        """Generate executive summary text."""
        metrics = self.generate_summary_metrics()
        plan = self.experiment.plan
        text = f"""
# {APP_TITLE}: Monte Carlo Summary

**Status:** {STATUS_ICONS[metrics['status']]} {metrics['status']}
**Generated:** {get_current_timestamp()}

## Plan
- **Model:** {plan.model.field.name} (G={plan.model.G}, d={plan.model.d}, rho={plan.model.rho:g})
- **N grid:** {', '.join(str(n) for n in plan.N)}
- **Replications:** {plan.replications} (seed {plan.seed})
- **Records:** {metrics['records']} ({metrics['failures']} failed)

## Acceptance
"""
        for check in self.experiment.acceptance:
            text += f"- {STATUS_ICONS[check.status]} **{check.name}**: {check.detail}\n"

        coverage = self.generate_coverage_dataframe()
        if not coverage.empty:
            text += "\n## Coverage\n\n| bound | stratum | delta | covered | fraction | SE |\n|---|---|---|---|---|---|\n"
            for row in coverage.itertuples():
                text += (f"| {row.lemma} | {row.stratum} | {row.delta:g} | {row.passed}/{row.total} "
                         f"| {row.fraction:.4f} | {row.standard_error:.4f} |\n")

        if self.sweep is not None:
            s = self.sweep.slope
            text += (f"\n## Rate slope\n\n{self.sweep.metric}: slope {s.slope:.4f} "
                     f"[{s.ci_low:.4f}, {s.ci_high:.4f}] at {s.confidence:.0%}; "
                     f"expected {self.sweep.expected_exponent:.4f}\n")

        failures = sorted({record.failure for record in self.experiment.failures})
        if failures:
            text += "\n## Failures\n\n" + ''.join(f"- {message}\n" for message in failures)
        return text


def bound_report_markdown(report: BoundReport) -> str:
    """Per-lemma values and every condition with both sides."""
    lines = ["# Bound report", ""]
    for name, record in report.records.items():
        status = 'applicable' if record.applicable else 'not applicable'
        lines.append(f"## {name}: {record.value:.6g} ({status})")
        for check in record.conditions:
            lhs = float('nan') if check.lhs is None else check.lhs
            rhs = float('nan') if check.rhs is None else check.rhs
            marker = '' if check.gating else ' (informational)'
            lines.append(f"- {format_check_message(check.rule_id, lhs, check.relation, rhs, check.passed)}{marker}")
        lines.append("")
    return '\n'.join(lines)
