"""Localized adjacency, regularized Laplacians and their population counterparts."""

import logging
from dataclasses import dataclass
from typing import Dict, Union

import numpy as np
import scipy.linalg

from config.settings import DEFAULT_TAU
from core.errors import LaplacianError
from utils.helpers import membership_matrix

logger = logging.getLogger(__name__)

TauSpec = Union[float, int, str, None]


@dataclass
class LocalizedLaplacian:
    """L = O_tau^{-1/2} A_eta Q_tau^{-1/2}; O_tau and Q_tau kept as diagonals."""
    A_eta: np.ndarray
    O_tau: np.ndarray
    Q_tau: np.ndarray
    tau: float
    L: np.ndarray

    @property
    def k(self) -> int:
        return self.A_eta.shape[0]


@dataclass
class PopulationLaplacian:
    """Population matrices at the query pair.

    The _xg variant uses B_{g(i)g(j)}(x(i), x(j)); the _xx variant uses
    B_{g(i)g(j)}(x, x'). Degrees are stored without tau.
    """
    P_xg: np.ndarray
    P_xx: np.ndarray
    O_xg: np.ndarray
    Q_xg: np.ndarray
    O_xx: np.ndarray
    Q_xx: np.ndarray
    L_xg: np.ndarray
    L_xx: np.ndarray
    tau: float
    g_x: np.ndarray
    g_xp: np.ndarray
    G: int
    B_pair: np.ndarray


@dataclass
class MinDegree:
    d_min: float
    components: Dict[str, float]


@dataclass
class PopulationFactorization:
    """Pieces of L_xx = Theta_x N_x^{-1} z_U Lambda z_V^T N_xp^{-1} Theta_xp^T.

    Only communities present in each neighborhood are kept.
    """
    groups_x: np.ndarray
    groups_xp: np.ndarray
    n_x: np.ndarray
    n_xp: np.ndarray
    O_bar: np.ndarray
    Q_bar: np.ndarray
    D: np.ndarray
    z_U: np.ndarray
    Lambda: np.ndarray
    z_V: np.ndarray
    Theta_x: np.ndarray
    Theta_xp: np.ndarray

    @property
    def Z_U(self) -> np.ndarray:
        return self.z_U / np.sqrt(self.n_x)[:, None]

    @property
    def Z_V(self) -> np.ndarray:
        return self.z_V / np.sqrt(self.n_xp)[:, None]

    def reconstruct(self) -> np.ndarray:
        left = self.Theta_x @ self.Z_U
        right = self.Theta_xp @ self.Z_V
        return (left * self.Lambda[None, :]) @ right.T


def build_localized(A: np.ndarray, eta_x, eta_xp) -> np.ndarray:
    """A_eta[a, b] = A[eta_x[a], eta_xp[b]]."""
    A = np.asarray(A)
    eta_x = np.asarray(eta_x, dtype=np.int64)
    eta_xp = np.asarray(eta_xp, dtype=np.int64)
    N = A.shape[0]
    for label, eta in (('eta_x', eta_x), ('eta_xp', eta_xp)):
        bad = eta[(eta < 0) | (eta >= N)]
        if bad.size:
            raise LaplacianError(f"{label} index {int(bad[0])} outside [0, {N - 1}]")
    return A[np.ix_(eta_x, eta_xp)]


def resolve_tau(A_eta: np.ndarray, tau: TauSpec = DEFAULT_TAU) -> float:
    """Numeric regularizer; 'mean-degree' (or None) gives the mean row degree of A_eta."""
    if tau is None or tau == 'mean-degree':
        return float(np.asarray(A_eta, dtype=float).sum(axis=1).mean())
    if isinstance(tau, str):
        raise LaplacianError(f"unknown tau policy {tau!r}")
    tau = float(tau)
    if tau < 0:
        raise LaplacianError(f"tau must be >= 0, got {tau}")
    return tau


def _inverse_sqrt(values: np.ndarray) -> np.ndarray:
    """Elementwise v^{-1/2}, with 0 for zero entries."""
    out = np.zeros_like(values, dtype=float)
    positive = values > 0
    out[positive] = 1.0 / np.sqrt(values[positive])
    return out


def laplacian(A_eta: np.ndarray, tau: TauSpec = DEFAULT_TAU) -> LocalizedLaplacian:
    """Regularized Laplacian of a localized adjacency block."""
    A_eta = np.asarray(A_eta, dtype=float)
    tau_value = resolve_tau(A_eta, tau)
    row = A_eta.sum(axis=1)
    col = A_eta.sum(axis=0)
    if tau_value == 0:
        for label, sums in (('row', row), ('column', col)):
            isolated = np.flatnonzero(sums <= 0)
            if isolated.size:
                raise LaplacianError(
                    f"tau=0 but {label} {int(isolated[0])} of the localized adjacency has zero degree")
    O_tau = row + tau_value
    Q_tau = col + tau_value
    L = (A_eta / np.sqrt(O_tau)[:, None]) / np.sqrt(Q_tau)[None, :]
    return LocalizedLaplacian(A_eta=A_eta, O_tau=O_tau, Q_tau=Q_tau, tau=tau_value, L=L)


def hermitian_dilation(M: np.ndarray) -> np.ndarray:
    """[[0, M], [M^T, 0]]."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n, m = M.shape
    out = np.zeros((n + m, n + m))
    out[:n, n:] = M
    out[n:, :n] = M.T
    return out


def spectral_norm(M: np.ndarray) -> float:
    """Largest singular value, read off the symmetric eigensolve of the dilation."""
    eigenvalues = scipy.linalg.eigvalsh(hermitian_dilation(M))
    return float(np.max(np.abs(eigenvalues)))


def laplacian_deviation(L: np.ndarray, L_pop: np.ndarray) -> float:
    """||dilation(L) - dilation(L_pop)||."""
    return spectral_norm(np.asarray(L, dtype=float) - np.asarray(L_pop, dtype=float))


def _normalize(P: np.ndarray, tau: float):
    rows = P.sum(axis=1)
    cols = P.sum(axis=0)
    L = P * _inverse_sqrt(rows + tau)[:, None] * _inverse_sqrt(cols + tau)[None, :]
    return rows, cols, L


def population_laplacians(spec, network, eta_x, eta_xp, x, xp, tau: float) -> PopulationLaplacian:
    """Both population variants at (x, x') built from the model's B."""
    if not network.labels_known:
        raise LaplacianError("population Laplacians need the hidden community labels")
    if isinstance(tau, str) or tau is None or float(tau) < 0:
        raise LaplacianError(f"population Laplacians need a numeric tau >= 0, got {tau!r}")
    tau = float(tau)
    eta_x = np.asarray(eta_x, dtype=np.int64)
    eta_xp = np.asarray(eta_xp, dtype=np.int64)
    g_x = network.g[eta_x]
    g_xp = network.g[eta_xp]

    P_xg = spec.B.pairwise(network.X[eta_x], g_x, network.X[eta_xp], g_xp)
    B_pair = spec.B.matrix(np.asarray(x, dtype=float), np.asarray(xp, dtype=float))
    P_xx = B_pair[g_x[:, None], g_xp[None, :]]

    O_xg, Q_xg, L_xg = _normalize(P_xg, tau)
    O_xx, Q_xx, L_xx = _normalize(P_xx, tau)
    return PopulationLaplacian(P_xg=P_xg, P_xx=P_xx, O_xg=O_xg, Q_xg=Q_xg, O_xx=O_xx, Q_xx=Q_xx,
                               L_xg=L_xg, L_xx=L_xx, tau=tau, g_x=g_x, g_xp=g_xp,
                               G=spec.G, B_pair=B_pair)


def min_degree(pop: PopulationLaplacian) -> MinDegree:
    """Minimum over the four localized expected-degree minima (tau excluded)."""
    components = {
        'O_xx': float(pop.O_xx.min()),
        'Q_xx': float(pop.Q_xx.min()),
        'O_xg': float(pop.O_xg.min()),
        'Q_xg': float(pop.Q_xg.min()),
    }
    return MinDegree(d_min=min(components.values()), components=components)


def population_factorization(pop: PopulationLaplacian) -> PopulationFactorization:
    """SVD of N_x O_bar^{-1/2} B Q_bar^{-1/2} N_xp over the present communities."""
    counts_x = np.bincount(pop.g_x, minlength=pop.G)
    counts_xp = np.bincount(pop.g_xp, minlength=pop.G)
    groups_x = np.flatnonzero(counts_x)
    groups_xp = np.flatnonzero(counts_xp)
    n_x = counts_x[groups_x].astype(float)
    n_xp = counts_xp[groups_xp].astype(float)

    B = pop.B_pair[np.ix_(groups_x, groups_xp)]
    O_bar = B @ n_xp + pop.tau
    Q_bar = n_x @ B + pop.tau
    D = (np.sqrt(n_x) * _inverse_sqrt(O_bar))[:, None] * B * (_inverse_sqrt(Q_bar) * np.sqrt(n_xp))[None, :]
    z_U, Lambda, z_Vt = scipy.linalg.svd(D, full_matrices=False)

    Theta_x = membership_matrix(pop.g_x, pop.G)[:, groups_x]
    Theta_xp = membership_matrix(pop.g_xp, pop.G)[:, groups_xp]
    return PopulationFactorization(groups_x=groups_x, groups_xp=groups_xp, n_x=n_x, n_xp=n_xp,
                                   O_bar=O_bar, Q_bar=Q_bar, D=D, z_U=z_U, Lambda=Lambda, z_V=z_Vt.T,
                                   Theta_x=Theta_x, Theta_xp=Theta_xp)


def centroid_distances(factorization: PopulationFactorization) -> np.ndarray:
    """Pairwise Euclidean distances between rows of Z_U (one row per present community)."""
    Z = factorization.Z_U
    diff = Z[:, None, :] - Z[None, :, :]
    return np.sqrt(np.sum(diff ** 2, axis=2))
