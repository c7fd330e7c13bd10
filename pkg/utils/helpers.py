"""General helper functions and utilities."""

import logging
import math
from datetime import datetime
from typing import Any, Optional

import numpy as np

from config.settings import LOG_FORMAT, LOG_LEVEL, STREAM_PURPOSES


def configure_logging(level: Optional[str] = None) -> None:
    """Install a single stream handler on the root logger."""
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(level or LOG_LEVEL)


def get_current_timestamp() -> str:
    """Get current timestamp in formatted string."""
    return datetime.now().strftime("%Y-%m-%d %H:%M:%S")


def unit_ball_volume(d: int) -> float:
    """Volume of the Euclidean unit ball in dimension d."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def rng_stream(seed: int, replication: int = 0, purpose: str = 'tests',
               substream: Optional[int] = None) -> np.random.Generator:
    """Counter-based random stream keyed by (seed, replication, purpose).

    Streams with distinct keys are statistically independent, so workers can
    draw concurrently without sharing state. substream splits a purpose
    further (one stream per K-means restart).
    """
    key = [int(seed), int(replication), STREAM_PURPOSES[purpose]]
    if substream is not None:
        key.append(int(substream))
    sequence = np.random.SeedSequence(key)
    return np.random.Generator(np.random.Philox(sequence))


def membership_matrix(labels: np.ndarray, G: int) -> np.ndarray:
    """One-hot N x G membership matrix from 0-based labels."""
    labels = np.asarray(labels, dtype=np.int64)
    theta = np.zeros((labels.size, G), dtype=np.int64)
    theta[np.arange(labels.size), labels] = 1
    return theta


def labels_from_membership(theta: np.ndarray) -> np.ndarray:
    """0-based labels from a membership matrix; each row must hold one 1."""
    theta = np.asarray(theta)
    if theta.ndim != 2 or not np.all(theta.sum(axis=1) == 1):
        raise ValueError("membership matrix must have exactly one 1 per row")
    return np.argmax(theta, axis=1).astype(np.int64)


def finite_or_none(value: float) -> Optional[float]:
    """Map NaN to None for JSON output; infinities are kept."""
    if value is None:
        return None
    value = float(value)
    return None if math.isnan(value) else value


def to_jsonable(obj: Any) -> Any:
    """Recursively convert numpy containers and scalars to JSON types.

    NaN becomes null so undefined estimates stay distinct from zero.
    """
    if isinstance(obj, dict):
        return {str(key): to_jsonable(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(value) for value in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return finite_or_none(obj)
    return obj


def format_check_message(check_id: str, lhs: float, relation: str, rhs: float, passed: bool) -> str:
    """Format a condition check with consistent structure."""
    status = 'PASS' if passed else 'FAIL'
    return f"[{check_id}] {lhs:.6g} {relation} {rhs:.6g} ({status})"


def parse_point(text: str) -> np.ndarray:
    """Parse a comma separated covariate vector such as '0.3' or '0.2,0.5'."""
    try:
        values = [float(part) for part in str(text).split(',') if part.strip()]
    except ValueError as exc:
        raise ValueError(f"cannot parse covariate point {text!r}") from exc
    if not values:
        raise ValueError(f"empty covariate point {text!r}")
    return np.asarray(values, dtype=float)
