"""Plug-in estimators of pi and B, oracle estimators and community-label alignment."""

import itertools
import logging
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from config.settings import MAX_EXACT_PERMUTATION_G
from core.errors import AlignmentError, EstimationError
from utils.helpers import labels_from_membership

logger = logging.getLogger(__name__)

EstimationMode = Literal['exclude-self', 'literal']


@dataclass
class PiOrdering:
    perm_x: np.ndarray
    perm_xp: np.ndarray
    tie_x: bool
    tie_xp: bool

    @property
    def tied(self) -> bool:
        return self.tie_x or self.tie_xp


@dataclass
class TruthAlignment:
    """perm[t] is the estimated label matched to true label t."""
    perm: np.ndarray
    misclassified: np.ndarray
    group_sizes: np.ndarray
    measure: float
    confusion: np.ndarray
    empty_groups: List[int] = field(default_factory=list)
    exact: bool = True


def _validate_membership(theta: np.ndarray, label: str) -> np.ndarray:
    theta = np.asarray(theta)
    try:
        labels_from_membership(theta)
    except ValueError as exc:
        raise EstimationError(f"{label}: {exc}") from exc
    return theta


def estimate_pi(Theta_hat_x: np.ndarray, k: Optional[int] = None) -> np.ndarray:
    """pi_hat_h = n_hat_h / k."""
    theta = _validate_membership(Theta_hat_x, 'Theta_hat_x')
    k = theta.shape[0] if k is None else int(k)
    if k != theta.shape[0]:
        raise EstimationError(f"k={k} does not match the {theta.shape[0]} membership rows")
    return theta.sum(axis=0) / k


def self_pair_mask(eta_x, eta_xp) -> np.ndarray:
    """mask[a, b] is True when eta_x[a] and eta_xp[b] are the same node."""
    return np.asarray(eta_x)[:, None] == np.asarray(eta_xp)[None, :]


def estimate_B(A_eta: np.ndarray, Theta_hat_x: np.ndarray, Theta_hat_xp: np.ndarray,
               eta_x=None, eta_xp=None, mode: EstimationMode = 'exclude-self') -> np.ndarray:
    """Block averages of A_eta over estimated communities.

    In 'exclude-self' mode pairs (i, i) shared by both neighborhoods leave the
    denominator; 'literal' keeps n_hat_g(x) * n_hat_h(x'). Entries with an
    empty denominator are NaN.
    """
    if mode not in ('exclude-self', 'literal'):
        raise EstimationError(f"unknown estimation mode {mode!r}")
    A_eta = np.asarray(A_eta, dtype=float)
    theta_x = _validate_membership(Theta_hat_x, 'Theta_hat_x').astype(float)
    theta_xp = _validate_membership(Theta_hat_xp, 'Theta_hat_xp').astype(float)
    if A_eta.shape != (theta_x.shape[0], theta_xp.shape[0]):
        raise EstimationError(f"A_eta shape {A_eta.shape} does not match memberships "
                              f"{theta_x.shape[0]} x {theta_xp.shape[0]}")

    totals = theta_x.T @ A_eta @ theta_xp
    pairs = np.outer(theta_x.sum(axis=0), theta_xp.sum(axis=0))
    if mode == 'exclude-self' and eta_x is not None and eta_xp is not None:
        pairs = pairs - theta_x.T @ self_pair_mask(eta_x, eta_xp).astype(float) @ theta_xp

    B_hat = np.full(totals.shape, np.nan)
    defined = pairs > 0
    B_hat[defined] = totals[defined] / pairs[defined]
    if not defined.all():
        logger.debug("B_hat undefined at %s (empty estimated group)", np.argwhere(~defined).tolist())
    return B_hat


def oracle_estimators(A_eta: np.ndarray, Theta_x: np.ndarray, Theta_xp: np.ndarray, k: Optional[int] = None,
                      eta_x=None, eta_xp=None, mode: EstimationMode = 'exclude-self') -> Tuple[np.ndarray, np.ndarray]:
    """pi_or and B_or: the same formulas evaluated with true memberships."""
    return (estimate_pi(Theta_x, k),
            estimate_B(A_eta, Theta_x, Theta_xp, eta_x=eta_x, eta_xp=eta_xp, mode=mode))


def _check_exact_size(G: int) -> None:
    if G > MAX_EXACT_PERMUTATION_G:
        raise AlignmentError(f"exact permutation search limited to G <= {MAX_EXACT_PERMUTATION_G}, got {G}")


def align_by_assortativity(B_candidate: np.ndarray, disassortative: bool = False) -> np.ndarray:
    """Column permutation maximizing trace (minimizing if disassortative).

    B_aligned = B_candidate[:, perm]. Undefined entries never win.
    """
    B = np.asarray(B_candidate, dtype=float)
    G = B.shape[0]
    if B.shape != (G, G):
        raise AlignmentError(f"B_candidate must be square, got {B.shape}")
    _check_exact_size(G)
    scores = np.where(np.isnan(B), np.inf if disassortative else -np.inf, B)
    if disassortative:
        scores = -scores
    for g in range(G):
        row = scores[g]
        if np.sum(row == row.max()) > 1:
            word = 'minimum' if disassortative else 'maximum'
            raise AlignmentError(f"row {g} has a tied {word}; use pi-ordering alignment instead")

    best_perm, best_score = None, -np.inf
    for perm in itertools.permutations(range(G)):
        score = scores[np.arange(G), perm].sum()
        if best_perm is None or score > best_score:
            best_perm, best_score = perm, score
    return np.asarray(best_perm, dtype=np.int64)


def _decreasing_order(pi: np.ndarray) -> Tuple[np.ndarray, bool]:
    pi = np.asarray(pi, dtype=float)
    order = np.lexsort((np.arange(pi.size), -pi))
    tie = bool(np.any(np.diff(pi[order]) == 0))
    return order.astype(np.int64), tie


def align_by_pi_ordering(pi_hat_x: np.ndarray, pi_hat_xp: np.ndarray) -> PiOrdering:
    """Permutations sorting both pi_hat vectors decreasingly; ties keep index order and are flagged."""
    perm_x, tie_x = _decreasing_order(pi_hat_x)
    perm_xp, tie_xp = _decreasing_order(pi_hat_xp)
    if tie_x or tie_xp:
        logger.debug("pi ordering has ties (x: %s, xp: %s)", tie_x, tie_xp)
    return PiOrdering(perm_x=perm_x, perm_xp=perm_xp, tie_x=tie_x, tie_xp=tie_xp)


def align_to_truth(Theta_hat: np.ndarray, Theta_true: np.ndarray) -> TruthAlignment:
    """Permutation of estimated labels minimizing disagreements with the truth."""
    est = labels_from_membership(_validate_membership(Theta_hat, 'Theta_hat'))
    true = labels_from_membership(_validate_membership(Theta_true, 'Theta_true'))
    if est.size != true.size:
        raise AlignmentError("memberships cover different index sets")
    G = max(np.asarray(Theta_hat).shape[1], np.asarray(Theta_true).shape[1])
    confusion = np.zeros((G, G), dtype=np.int64)
    np.add.at(confusion, (true, est), 1)

    if G <= MAX_EXACT_PERMUTATION_G:
        best_perm, best_hits = None, -1
        for perm in itertools.permutations(range(G)):
            hits = int(confusion[np.arange(G), perm].sum())
            if hits > best_hits:
                best_perm, best_hits = perm, hits
        perm = np.asarray(best_perm, dtype=np.int64)
        exact = True
    else:
        _, perm = linear_sum_assignment(-confusion)
        perm = perm.astype(np.int64)
        exact = False

    sizes = confusion.sum(axis=1)
    misclassified = sizes - confusion[np.arange(G), perm]
    empty = [int(t) for t in np.flatnonzero(sizes == 0)]
    present = sizes > 0
    measure = float(np.sum(misclassified[present] / sizes[present]))
    return TruthAlignment(perm=perm, misclassified=misclassified, group_sizes=sizes, measure=measure,
                          confusion=confusion, empty_groups=empty, exact=exact)
