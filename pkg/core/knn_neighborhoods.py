"""k-NN radii, neighborhoods and the radius envelopes R_k and underline R_k."""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
from scipy.spatial.distance import cdist

from core.errors import NeighborhoodError
from utils.helpers import unit_ball_volume

logger = logging.getLogger(__name__)

GRID_CHUNK_ROWS = 256


@dataclass
class Neighborhood:
    """k nearest sample points of a query covariate (closed ball)."""
    x: np.ndarray
    k: int
    radius: float
    members: np.ndarray
    group_counts: Optional[np.ndarray] = None

    def as_dict(self) -> Dict:
        out = {
            'x': self.x.tolist(),
            'k': self.k,
            'radius': self.radius,
            'members': self.members.tolist(),
        }
        if self.group_counts is not None:
            out['group_counts'] = self.group_counts.tolist()
        return out


def _as_samples(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.size == 0:
        raise NeighborhoodError("no covariate samples to search")
    return X


def _distances(X: np.ndarray, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(1, -1)
    if x.shape[1] != X.shape[1]:
        raise NeighborhoodError(f"query has dimension {x.shape[1]}, samples have {X.shape[1]}")
    return cdist(x, X)[0]


def _k_smallest(dist: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k smallest distances; equal distances go to the lower index."""
    order = np.lexsort((np.arange(dist.size), dist))
    return order[:k]


def knn_radius(X, x, k: int) -> Neighborhood:
    """Radius r_k(x) and the k nearest members (sorted indices)."""
    X = _as_samples(X)
    N = X.shape[0]
    if not 1 <= k <= N:
        raise NeighborhoodError(f"k={k} must satisfy 1 <= k <= N={N}")
    dist = _distances(X, x)
    chosen = _k_smallest(dist, k)
    return Neighborhood(x=np.asarray(x, dtype=float).reshape(-1), k=int(k),
                        radius=float(dist[chosen[-1]]), members=np.sort(chosen))


def neighborhood(X, x, k: int, g: Optional[np.ndarray] = None, G: Optional[int] = None) -> Neighborhood:
    """knn_radius plus per-community counts n_h(x) when labels are known."""
    result = knn_radius(X, x, k)
    if g is not None:
        g = np.asarray(g, dtype=np.int64)
        G = G if G is not None else int(g.max()) + 1
        result.group_counts = np.bincount(g[result.members], minlength=G)
    return result


def subgroup_radius(X, g, h: int, x, l: int) -> float:
    """l-NN radius r_l^h(x) among the nodes of community h."""
    X = _as_samples(X)
    g = np.asarray(g, dtype=np.int64)
    subset = np.flatnonzero(g == h)
    if l < 1 or subset.size < l:
        raise NeighborhoodError(f"community {h} has {subset.size} members, need at least l={l}")
    dist = _distances(X[subset], x)
    return float(np.partition(dist, l - 1)[l - 1])


def region_grid(region, resolution: int) -> np.ndarray:
    """Regular grid over the box, corners included; resolution**d points."""
    if resolution < 2:
        raise NeighborhoodError(f"grid resolution must be >= 2, got {resolution}")
    axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(region.lower, region.upper)]
    mesh = np.meshgrid(*axes, indexing='ij')
    return np.column_stack([m.ravel() for m in mesh])


def radius_grid(X, k: int, grid: np.ndarray) -> np.ndarray:
    """r_k evaluated at every grid point."""
    X = _as_samples(X)
    if not 1 <= k <= X.shape[0]:
        raise NeighborhoodError(f"k={k} must satisfy 1 <= k <= N={X.shape[0]}")
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    radii = np.empty(grid.shape[0])
    for start in range(0, grid.shape[0], GRID_CHUNK_ROWS):
        block = cdist(grid[start:start + GRID_CHUNK_ROWS], X)
        radii[start:start + GRID_CHUNK_ROWS] = np.partition(block, k - 1, axis=1)[:, k - 1]
    return radii


@dataclass
class RadiusEnvelopes:
    """Upper envelope R_k, lower envelope underline R_k and their conditions."""
    R_k: float
    underline_R_k: Optional[float]
    upper_applicable: bool
    lower_applicable: bool
    conditions: Dict[str, Dict[str, float]] = field(default_factory=dict)

    @property
    def lower_defined(self) -> bool:
        return self.underline_R_k is not None


def radius_envelopes(spec, N: int, k: int, delta: float) -> RadiusEnvelopes:
    """R_k = (2k/(N b_X c V_d))^(1/d); underline R_k from the 12 d ln(12N/delta) margin."""
    constants = spec.constants
    missing = [name for name in ('c', 'T', 'b_X', 'U_bar_X') if getattr(constants, name) is None]
    if missing:
        raise NeighborhoodError(f"radius envelopes need constants {missing}")
    if not 0 < delta < 1:
        raise NeighborhoodError(f"delta={delta} must lie in (0, 1)")
    d = spec.d
    V_d = unit_ball_volume(d)
    c, T, b_X, U_bar = constants.c, constants.T, constants.b_X, constants.U_bar_X

    R_k = (2.0 * k / (N * b_X * c * V_d)) ** (1.0 / d) if b_X * c > 0 else math.inf
    margin = 12.0 * d * math.log(12.0 * N / delta)
    underline = ((k - margin) / (4.0 * N * U_bar * V_d)) ** (1.0 / d) if k >= margin else None
    if underline is None:
        logger.debug("underline R_k undefined: k=%d below 12 d ln(12N/delta)=%.4g", k, margin)

    upper_cap = T ** d * N * b_X * c * V_d / 2.0
    conditions = {
        'upper_lower_k': {'lhs': 2.0 * margin, 'rhs': float(k)},
        'upper_upper_k': {'lhs': float(k), 'rhs': upper_cap},
        'lower_k': {'lhs': float(k), 'rhs': margin},
    }
    return RadiusEnvelopes(
        R_k=float(R_k),
        underline_R_k=None if underline is None else float(underline),
        upper_applicable=bool(2.0 * margin <= k <= upper_cap),
        lower_applicable=bool(k >= margin),
        conditions=conditions,
    )
