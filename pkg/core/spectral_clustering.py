"""Top-G SVD of the localized Laplacian and K-means on singular-vector rows."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, Field

from config.settings import (EIGENGAP_TOLERANCE, KMEANS_EPSILON, KMEANS_MAX_ITERS, KMEANS_RESTARTS,
                             NORM_TOLERANCE, SIGN_TOLERANCE, ZERO_SINGULAR_VALUE)
from core.errors import ClusteringError
from utils.helpers import membership_matrix, rng_stream

logger = logging.getLogger(__name__)


class ClusteringConfig(BaseModel):
    """K-means settings; restarts use independent streams keyed by restart index."""
    model_config = ConfigDict(extra='forbid')

    G: int = Field(ge=1)
    restarts: int = Field(default=KMEANS_RESTARTS, ge=1)
    max_iters: int = Field(default=KMEANS_MAX_ITERS, ge=1)
    epsilon: float = Field(default=KMEANS_EPSILON, ge=0.0)
    seed: int = 0
    replication: int = 0
    workers: int = Field(default=1, ge=1)


@dataclass
class SpectralDecomposition:
    U: np.ndarray
    V: np.ndarray
    sigma: np.ndarray
    eigengap: float
    rank_deficient: bool

    @property
    def eigengap_small(self) -> bool:
        return self.eigengap <= EIGENGAP_TOLERANCE


@dataclass
class KMeansResult:
    labels: np.ndarray
    membership: np.ndarray
    centroids: np.ndarray
    objective: float
    objectives: List[float]
    best_restart: int
    epsilon_spread: float
    within_epsilon: int
    reseeded: int = 0


@dataclass
class ClusteringResult:
    Theta_hat_x: np.ndarray
    Theta_hat_xp: np.ndarray
    decomposition: SpectralDecomposition
    kmeans_x: KMeansResult
    kmeans_xp: KMeansResult


@dataclass
class DavisKahanCheck:
    Q: np.ndarray
    lhs: float
    rhs: float
    lambda_G: float
    deviation: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + NORM_TOLERANCE


@dataclass
class MisclusteringReport:
    """Sets S_g of rows far from their population centroid, per true community."""
    sets: List[np.ndarray]
    group_sizes: np.ndarray
    measure: float
    chain_lhs: float
    chain_rhs: float
    thresholds: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def chain_holds(self) -> bool:
        return self.chain_lhs <= self.chain_rhs + NORM_TOLERANCE


def top_svd(L: np.ndarray, G: int) -> SpectralDecomposition:
    """G leading singular triplets with a deterministic sign convention.

    The first entry of each U column with magnitude above SIGN_TOLERANCE is
    made positive; the matching V column is flipped with it.
    """
    L = np.atleast_2d(np.asarray(L, dtype=float))
    if G < 1 or G > min(L.shape):
        raise ClusteringError(f"G={G} must satisfy 1 <= G <= {min(L.shape)}")
    U_full, s, Vt = scipy.linalg.svd(L, full_matrices=False)
    U = U_full[:, :G].copy()
    V = Vt[:G].T.copy()
    sigma = s[:G].copy()
    for j in range(G):
        nonzero = np.flatnonzero(np.abs(U[:, j]) > SIGN_TOLERANCE)
        if nonzero.size and U[nonzero[0], j] < 0:
            U[:, j] *= -1.0
            V[:, j] *= -1.0
    next_sigma = s[G] if s.size > G else 0.0
    rank_deficient = bool(sigma[-1] <= ZERO_SINGULAR_VALUE)
    if rank_deficient:
        logger.debug("rank of L below G=%d: sigma_G=%.3e", G, sigma[-1])
    return SpectralDecomposition(U=U, V=V, sigma=sigma, eigengap=float(sigma[-1] - next_sigma),
                                 rank_deficient=rank_deficient)


def _furthest_point_seeds(M: np.ndarray, G: int) -> np.ndarray:
    """Greedy seeding: the row furthest from the mean, then repeatedly the row furthest from all seeds."""
    first = int(np.argmax(np.sum((M - M.mean(axis=0)) ** 2, axis=1)))
    chosen = [first]
    nearest = np.sum((M - M[first]) ** 2, axis=1)
    for _ in range(1, G):
        nxt = int(np.argmax(nearest))
        chosen.append(nxt)
        nearest = np.minimum(nearest, np.sum((M - M[nxt]) ** 2, axis=1))
    return M[chosen].copy()


def _lloyd(M: np.ndarray, centroids: np.ndarray, max_iters: int):
    G = centroids.shape[0]
    labels = None
    reseeded = 0
    for _ in range(max_iters):
        sq = np.sum((M[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(sq, axis=1)
        point_cost = sq[np.arange(M.shape[0]), new_labels]
        for h in range(G):
            members = new_labels == h
            if members.any():
                centroids[h] = M[members].mean(axis=0)
            else:
                far = int(np.argmax(point_cost))
                centroids[h] = M[far]
                point_cost[far] = 0.0
                reseeded += 1
        if labels is not None and np.array_equal(labels, new_labels):
            labels = new_labels
            break
        labels = new_labels
    sq = np.sum((M[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
    labels = np.argmin(sq, axis=1)
    for h in range(G):
        members = labels == h
        if members.any():
            centroids[h] = M[members].mean(axis=0)
    objective = float(np.sum((M - centroids[labels]) ** 2))
    return labels, centroids, objective, reseeded


def kmeans_rows(M: np.ndarray, config: ClusteringConfig) -> KMeansResult:
    """Lloyd K-means over the rows of M with restarts; the lowest objective wins.

    Restart 0 is seeded greedily by furthest points, later restarts with
    distinct uniformly drawn rows. Ties go to the lowest restart index.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n, G = M.shape[0], config.G
    if n < G:
        raise ClusteringError(f"K-means needs at least G={G} rows, got {n}")

    def run(restart: int):
        if restart == 0:
            seeds = _furthest_point_seeds(M, G)
        else:
            rng = rng_stream(config.seed, config.replication, 'kmeans', substream=restart)
            seeds = M[rng.choice(n, size=G, replace=False)].copy()
        return _lloyd(M, seeds, config.max_iters)

    restarts = range(config.restarts)
    if config.workers > 1 and config.restarts > 1:
        with ThreadPoolExecutor(max_workers=min(config.workers, config.restarts)) as executor:
            runs = list(executor.map(run, restarts))
    else:
        runs = [run(restart) for restart in restarts]

    best = None
    objectives = []
    total_reseeds = 0
    for restart, (labels, centroids, objective, reseeded) in enumerate(runs):
        objectives.append(objective)
        total_reseeds += reseeded
        if best is None or objective < best[2]:
            best = (labels, centroids, objective, restart)
    if total_reseeds:
        logger.debug("K-means re-seeded %d empty clusters", total_reseeds)

    labels, centroids, objective, restart = best
    if objective > 0:
        ratios = [obj / objective for obj in objectives]
    else:
        ratios = [1.0 if obj == 0 else math.inf for obj in objectives]
    within = sum(1 for r in ratios if r <= 1.0 + config.epsilon)
    return KMeansResult(labels=labels.astype(np.int64), membership=membership_matrix(labels, G),
                        centroids=centroids, objective=objective, objectives=objectives,
                        best_restart=restart, epsilon_spread=float(max(ratios) - 1.0),
                        within_epsilon=within, reseeded=total_reseeds)


def cluster_neighborhoods(L: np.ndarray, config: ClusteringConfig) -> ClusteringResult:
    """K-means on the rows of U gives Theta_hat(x); on the rows of V, Theta_hat(x')."""
    decomposition = top_svd(L, config.G)
    kmeans_x = kmeans_rows(decomposition.U, config)
    kmeans_xp = kmeans_rows(decomposition.V, config)
    return ClusteringResult(Theta_hat_x=kmeans_x.membership, Theta_hat_xp=kmeans_xp.membership,
                            decomposition=decomposition, kmeans_x=kmeans_x, kmeans_xp=kmeans_xp)


def procrustes_rotation(U: np.ndarray, U_pop: np.ndarray) -> np.ndarray:
    """Orthogonal Q minimizing ||U - U_pop Q||_F."""
    Q, _ = scipy.linalg.orthogonal_procrustes(U_pop, U)
    return Q


def davis_kahan_check(U: np.ndarray, U_pop: np.ndarray, lambda_G: float, deviation: float,
                      G: Optional[int] = None) -> DavisKahanCheck:
    """Both sides of ||U - U_pop Q||_F <= 4 sqrt(2G) / lambda_G * deviation."""
    G = G or U.shape[1]
    Q = procrustes_rotation(U, U_pop)
    lhs = float(np.linalg.norm(U - U_pop @ Q))
    if lambda_G <= ZERO_SINGULAR_VALUE:
        rhs = math.inf
    else:
        rhs = 4.0 * math.sqrt(2.0 * G) / lambda_G * deviation
    return DavisKahanCheck(Q=Q, lhs=lhs, rhs=float(rhs), lambda_G=float(lambda_G), deviation=float(deviation))


def misclustering_sets(labels_hat: np.ndarray, centroids: np.ndarray, U: np.ndarray,
                       U_pop: np.ndarray, Q: np.ndarray, g_true: np.ndarray, G: int) -> MisclusteringReport:
    """S_g = {i in community g : ||Ubar_i - (U_pop Q)_i|| >= sqrt(1/n_g + 1/max_{l != g} n_l) / 2}."""
    g_true = np.asarray(g_true, dtype=np.int64)
    U_bar = np.asarray(centroids)[np.asarray(labels_hat, dtype=np.int64)]
    target = U_pop @ Q
    row_dist = np.linalg.norm(U_bar - target, axis=1)
    sizes = np.bincount(g_true, minlength=G)

    sets, thresholds = [], np.zeros(G)
    measure = 0.0
    for g in range(G):
        if sizes[g] == 0:
            sets.append(np.zeros(0, dtype=np.int64))
            continue
        others = [sizes[h] for h in range(G) if h != g and sizes[h] > 0]
        spread = 1.0 / sizes[g] + (1.0 / max(others) if others else 0.0)
        thresholds[g] = 0.5 * math.sqrt(spread)
        members = np.flatnonzero(g_true == g)
        far = members[row_dist[members] >= thresholds[g]]
        sets.append(far)
        measure += far.size / sizes[g]
    return MisclusteringReport(sets=sets, group_sizes=sizes, measure=float(measure),
                               chain_lhs=float(np.linalg.norm(U_bar - target)),
                               chain_rhs=float(2.0 * np.linalg.norm(U - target)),
                               thresholds=thresholds)
