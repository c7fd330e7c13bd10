"""Full estimator at one query pair: neighborhoods, Laplacian, clustering, plug-in estimates."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Literal, Optional

import numpy as np

from config.settings import DEFAULT_TAU
from core.errors import EstimationError
from core.estimators import (EstimationMode, align_by_assortativity, align_by_pi_ordering, estimate_B,
                             estimate_pi)
from core.knn_neighborhoods import Neighborhood, neighborhood
from core.localized_laplacian import LocalizedLaplacian, build_localized, laplacian
from core.spectral_clustering import ClusteringConfig, ClusteringResult, cluster_neighborhoods
from utils.helpers import to_jsonable

logger = logging.getLogger(__name__)

AlignmentMethod = Literal['none', 'assortative', 'disassortative', 'pi-order']


@dataclass
class EstimationResult:
    """Estimates at (x, x'); column j of B_hat refers to label j of Theta_hat_xp."""
    x: np.ndarray
    xp: np.ndarray
    k: int
    tau: float
    neighborhood_x: Neighborhood
    neighborhood_xp: Neighborhood
    Theta_hat_x: np.ndarray
    Theta_hat_xp: np.ndarray
    pi_hat: np.ndarray
    pi_hat_xp: np.ndarray
    B_hat: np.ndarray
    n_hat_x: np.ndarray
    n_hat_xp: np.ndarray
    alignment: Dict[str, Any] = field(default_factory=dict)
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    laplacian: Optional[LocalizedLaplacian] = None
    clustering: Optional[ClusteringResult] = None

    @property
    def eta_x(self) -> np.ndarray:
        return self.neighborhood_x.members

    @property
    def eta_xp(self) -> np.ndarray:
        return self.neighborhood_xp.members

    def to_dict(self) -> Dict[str, Any]:
        """JSON view; undefined B_hat entries become null."""
        return to_jsonable({
            'x': self.x,
            'xp': self.xp,
            'k': self.k,
            'tau': self.tau,
            'radius_x': self.neighborhood_x.radius,
            'radius_xp': self.neighborhood_xp.radius,
            'eta_x': self.eta_x,
            'eta_xp': self.eta_xp,
            'labels_x': np.argmax(self.Theta_hat_x, axis=1),
            'labels_xp': np.argmax(self.Theta_hat_xp, axis=1),
            'pi_hat': self.pi_hat,
            'pi_hat_xp': self.pi_hat_xp,
            'B_hat': self.B_hat,
            'n_hat_x': self.n_hat_x,
            'n_hat_xp': self.n_hat_xp,
            'alignment': self.alignment,
            'diagnostics': self.diagnostics,
        })


def estimate_pair(network, x, xp, k: int, G: int, tau=DEFAULT_TAU,
                  clustering_config: Optional[ClusteringConfig] = None,
                  mode: EstimationMode = 'exclude-self',
                  alignment: AlignmentMethod = 'none') -> EstimationResult:
    """Run the localized spectral estimator at the query pair (x, x')."""
    config = clustering_config or ClusteringConfig(G=G)
    if config.G != G:
        raise EstimationError(f"clustering config has G={config.G}, requested G={G}")
    x = np.asarray(x, dtype=float).reshape(-1)
    xp = np.asarray(xp, dtype=float).reshape(-1)

    labels = network.g if network.labels_known else None
    nb_x = neighborhood(network.X, x, k, labels, network.G)
    nb_xp = neighborhood(network.X, xp, k, labels, network.G)
    A_eta = build_localized(network.A, nb_x.members, nb_xp.members)
    lap = laplacian(A_eta, tau)
    clustering = cluster_neighborhoods(lap.L, config)

    theta_x = clustering.Theta_hat_x
    theta_xp = clustering.Theta_hat_xp
    B_hat = estimate_B(A_eta, theta_x, theta_xp, nb_x.members, nb_xp.members, mode=mode)
    pi_hat = estimate_pi(theta_x, k)
    pi_hat_xp = estimate_pi(theta_xp, k)

    applied = {'method': alignment, 'perm_x': list(range(G)), 'perm_xp': list(range(G))}
    if alignment in ('assortative', 'disassortative'):
        perm = align_by_assortativity(B_hat, disassortative=alignment == 'disassortative')
        applied['perm_xp'] = perm.tolist()
        theta_xp = theta_xp[:, perm]
        B_hat = B_hat[:, perm]
        pi_hat_xp = pi_hat_xp[perm]
    elif alignment == 'pi-order':
        ordering = align_by_pi_ordering(pi_hat, pi_hat_xp)
        applied.update(perm_x=ordering.perm_x.tolist(), perm_xp=ordering.perm_xp.tolist(),
                       tie=ordering.tied)
        theta_x = theta_x[:, ordering.perm_x]
        theta_xp = theta_xp[:, ordering.perm_xp]
        B_hat = B_hat[np.ix_(ordering.perm_x, ordering.perm_xp)]
        pi_hat = pi_hat[ordering.perm_x]
        pi_hat_xp = pi_hat_xp[ordering.perm_xp]
    elif alignment != 'none':
        raise EstimationError(f"unknown alignment method {alignment!r}")

    decomposition = clustering.decomposition
    diagnostics = {
        'sigma': decomposition.sigma,
        'eigengap': decomposition.eigengap,
        'eigengap_small': decomposition.eigengap_small,
        'rank_deficient': decomposition.rank_deficient,
        'overlap': int(np.intersect1d(nb_x.members, nb_xp.members).size),
        'kmeans_objective_x': clustering.kmeans_x.objective,
        'kmeans_objective_xp': clustering.kmeans_xp.objective,
        'kmeans_epsilon_spread_x': clustering.kmeans_x.epsilon_spread,
        'kmeans_epsilon_spread_xp': clustering.kmeans_xp.epsilon_spread,
        'kmeans_reseeded': clustering.kmeans_x.reseeded + clustering.kmeans_xp.reseeded,
        'undefined_B_entries': int(np.isnan(B_hat).sum()),
        'mode': mode,
    }
    logger.debug("estimated pair x=%s xp=%s k=%d tau=%.4g", x.tolist(), xp.tolist(), k, lap.tau)
    return EstimationResult(x=x, xp=xp, k=int(k), tau=lap.tau, neighborhood_x=nb_x, neighborhood_xp=nb_xp,
                            Theta_hat_x=theta_x, Theta_hat_xp=theta_xp, pi_hat=pi_hat, pi_hat_xp=pi_hat_xp,
                            B_hat=B_hat, n_hat_x=theta_x.sum(axis=0), n_hat_xp=theta_xp.sum(axis=0),
                            alignment=applied, diagnostics=diagnostics, laplacian=lap, clustering=clustering)
