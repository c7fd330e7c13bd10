"""Reading and writing networks, configs, results and reports."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from config.schemas import schema_errors
from config.settings import CSV_FLOAT_FORMAT, JSON_INDENT
from core.errors import ModelSpecError, PlanError
from core.montecarlo_harness import ExperimentPlan, ExperimentResult, SweepResult
from core.sbm_core import ModelConfig, Network
from utils.helpers import to_jsonable

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

EDGES_FILE = 'edges.csv'
COVARIATES_FILE = 'covariates.csv'
LABELS_FILE = 'labels.csv'
MODEL_FILE = 'model.json'


class FileHandler:
    """Handles every file the command line reads or writes."""

    def __init__(self, float_format: str = CSV_FLOAT_FORMAT):
        self.float_format = float_format

    # -- generic ------------------------------------------------------------

    def read_json(self, path: PathLike, error: type = PlanError) -> Dict[str, Any]:
        try:
            with open(path, 'r', encoding='utf-8') as handle:
                return json.load(handle)
        except (OSError, json.JSONDecodeError) as exc:
            raise error(f"cannot read JSON file {path}: {exc}") from exc

    def write_json(self, data: Any, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as handle:
            json.dump(to_jsonable(data), handle, indent=JSON_INDENT, sort_keys=True)
            handle.write('\n')
        return path

    def write_csv(self, frame: pd.DataFrame, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=self.float_format, lineterminator='\n')
        return path

    def write_text(self, text: str, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding='utf-8')
        return path

    # -- configs ------------------------------------------------------------

    def load_model_config(self, path: PathLike) -> ModelConfig:
        """Schema check, then the typed model."""
        document = self.read_json(path, ModelSpecError)
        errors = schema_errors(document, 'model')
        if errors:
            raise ModelSpecError(f"{path}: " + '; '.join(errors))
        try:
            return ModelConfig.model_validate(document)
        except ValidationError as exc:
            raise ModelSpecError(f"{path}: {exc}") from exc

    def load_plan(self, path: PathLike) -> ExperimentPlan:
        document = self.read_json(path)
        errors = schema_errors(document, 'plan')
        if errors:
            raise PlanError(f"{path}: " + '; '.join(errors))
        try:
            return ExperimentPlan.model_validate(document)
        except ValidationError as exc:
            raise PlanError(f"{path}: {exc}") from exc

    # -- networks -----------------------------------------------------------

    def save_network(self, network: Network, directory: PathLike,
                     model: Optional[ModelConfig] = None) -> Dict[str, Path]:
        """edges.csv (i < j), covariates.csv and, when known, labels.csv."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        rows, cols = np.nonzero(np.triu(network.A, k=1))
        written = {
            'edges': self.write_csv(pd.DataFrame({'i': rows, 'j': cols}), directory / EDGES_FILE),
            'covariates': self.write_csv(self._covariate_frame(network.X), directory / COVARIATES_FILE),
        }
        if network.labels_known:
            labels = pd.DataFrame({'node': np.arange(network.N), 'g': network.g})
            written['labels'] = self.write_csv(labels, directory / LABELS_FILE)
        if model is not None:
            written['model'] = self.write_json(model.model_dump(), directory / MODEL_FILE)
        logger.info("wrote network with N=%d and %d edges to %s", network.N, rows.size, directory)
        return written

    @staticmethod
    def _covariate_frame(X: np.ndarray) -> pd.DataFrame:
        frame = pd.DataFrame(X, columns=[f'x{j}' for j in range(X.shape[1])])
        frame.insert(0, 'node', np.arange(X.shape[0]))
        return frame

    def load_network(self, edges: PathLike, covariates: PathLike,
                     labels: Optional[PathLike] = None, G: Optional[int] = None) -> Network:
        """Network from CSV files; node ids must be 0..N-1."""
        try:
            cov = pd.read_csv(covariates)
            edge_frame = pd.read_csv(edges)
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
            raise ModelSpecError(f"cannot read network files: {exc}") from exc
        value_columns = [c for c in cov.columns if c != 'node']
        if 'node' in cov.columns:
            cov = cov.sort_values('node')
            if not np.array_equal(cov['node'].to_numpy(), np.arange(len(cov))):
                raise ModelSpecError("covariate node ids must be 0..N-1")
        X = cov[value_columns].to_numpy(dtype=float)
        N = X.shape[0]

        missing = {'i', 'j'} - set(edge_frame.columns)
        if missing:
            raise ModelSpecError(f"edges file lacks columns {sorted(missing)}")
        i = edge_frame['i'].to_numpy(dtype=np.int64)
        j = edge_frame['j'].to_numpy(dtype=np.int64)
        if i.size and (min(i.min(), j.min()) < 0 or max(i.max(), j.max()) >= N):
            raise ModelSpecError(f"edge endpoint outside [0, {N - 1}]")
        if np.any(i == j):
            raise ModelSpecError(f"self-loop at node {int(i[i == j][0])}")
        A = np.zeros((N, N), dtype=np.uint8)
        A[i, j] = 1
        A[j, i] = 1

        g = None
        if labels is not None:
            try:
                label_frame = pd.read_csv(labels)
            except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
                raise ModelSpecError(f"cannot read labels file: {exc}") from exc
            missing = {'node', 'g'} - set(label_frame.columns)
            if missing:
                raise ModelSpecError(f"labels file lacks columns {sorted(missing)}")
            label_frame = label_frame.sort_values('node')
            nodes = label_frame['node'].to_numpy(dtype=np.int64)
            expected = np.arange(N)
            if not np.array_equal(nodes, expected):
                if nodes.size != N:
                    raise ModelSpecError(f"labels file has {nodes.size} nodes, covariates have {N}")
                first = int(np.flatnonzero(nodes != expected)[0])
                raise ModelSpecError(f"labels node id {int(nodes[first])} does not match covariate node {first}")
            g = label_frame['g'].to_numpy(dtype=np.int64)
        network = Network(X=X, A=A, g=g, G=G)
        network.validate()
        return network

    # -- results ------------------------------------------------------------

    def save_estimation(self, result, path: PathLike) -> Path:
        return self.write_json(result.to_dict(), path)

    def save_laplacian_dump(self, result, directory: PathLike) -> Dict[str, Path]:
        """A_eta and L as CSV for debugging."""
        directory = Path(directory)
        lap = result.laplacian
        return {
            'A_eta': self.write_csv(pd.DataFrame(lap.A_eta), directory / 'A_eta.csv'),
            'L': self.write_csv(pd.DataFrame(lap.L), directory / 'L.csv'),
        }

    def save_bound_report(self, report, path: PathLike) -> Path:
        path = Path(path)
        self.write_csv(pd.DataFrame(report.summary_rows()), path.with_suffix('.csv'))
        return self.write_json(report.to_dict(), path)

    def save_experiment(self, experiment: ExperimentResult, directory: PathLike,
                        report_generator=None) -> Dict[str, Path]:
        """records.csv, coverage.csv, summary.json and, with a generator, charts and summary.md."""
        directory = Path(directory)
        written = {
            'records': self.write_csv(pd.DataFrame([r.to_row() for r in experiment.records]),
                                      directory / 'records.csv'),
            'summary': self.write_json(experiment.summary(), directory / 'summary.json'),
        }
        if report_generator is not None:
            written['coverage'] = self.write_csv(report_generator.generate_coverage_dataframe(),
                                                 directory / 'coverage.csv')
            written['metrics'] = self.write_csv(report_generator.generate_metric_summary(),
                                                directory / 'metrics.csv')
            written['report'] = self.write_text(report_generator.generate_executive_summary(),
                                                directory / 'summary.md')
            chart = report_generator.create_coverage_chart()
            chart.write_html(str(directory / 'coverage.html'), include_plotlyjs='cdn')
            written['chart'] = directory / 'coverage.html'
        return written

    def save_sweep(self, sweep: SweepResult, path: PathLike, report_generator=None) -> Path:
        """Per-N medians with the fitted slope repeated on each row."""
        frame = pd.DataFrame(sweep.rows())
        for key in ('slope', 'ci_low', 'ci_high', 'stderr'):
            frame[key] = getattr(sweep.slope, key)
        frame['expected_exponent'] = sweep.expected_exponent
        frame['metric'] = sweep.metric
        path = self.write_csv(frame, path)
        if report_generator is not None:
            chart = report_generator.create_rate_chart()
            if chart is not None:
                chart.write_html(str(Path(path).with_suffix('.html')), include_plotlyjs='cdn')
        return path
