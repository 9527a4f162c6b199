"""Destructive kernel orthogonal matching pursuit with pre-fitting.

Atoms are removed greedily from a candidate expansion ``f~`` while the
Hilbert-norm distance between the pruned function and ``f~`` stays within a
budget ``eps``.  Every removal error is measured against the original ``f~``,
and after each removal the surviving weights are refit to ``f~`` by
orthogonal projection.

For a kept index set ``S`` with projection ``P_S f~`` the removal error of
``j in S`` obeys the Pythagorean split

    gamma_j^2 = ||f~ - P_S f~||^2 + w_j^2 / [K_SS^{-1}]_jj ,

where ``w = K_SS^{-1} K_{S,D~} w~`` are the refit weights.  One inverse of
``K_SS`` therefore scores every candidate, and it is downdated in ``O(M^2)``
after each removal.  Zero-weight atoms and bit-identical twins cost nothing
to remove and are handled first by exact bookkeeping.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .kernel import Kernel, KernelExpansion, as_points, psd_inverse, psd_solve

DEFAULT_W_MAX = 1e6
# Removing an atom whose inverse-Gram diagonal exceeds this triggers a fresh
# inverse instead of a rank-one downdate (cancellation near singularity).
_DOWNDATE_LIMIT = 1e6


@dataclass(frozen=True)
class PruneResult:
    function: KernelExpansion
    removed_indices: tuple
    final_error: float


def _point_groups(points: np.ndarray):
    """Group id per row (bit-identical rows share an id) and one representative per group."""
    _, first, group = np.unique(points, axis=0, return_index=True, return_inverse=True)
    return group.ravel(), first


def _merged_residual_norm(K: np.ndarray, group: np.ndarray, first: np.ndarray, r: np.ndarray) -> float:
    merged = np.bincount(group, weights=r, minlength=first.shape[0])
    q = float(merged @ (K[np.ix_(first, first)] @ merged))
    return float(np.sqrt(q)) if q > 0 else 0.0


def removal_error(f_tilde: KernelExpansion, keep) -> float:
    """Least Hilbert-norm error of approximating ``f_tilde`` with the atoms in ``keep``."""
    M = f_tilde.order
    keep = np.unique(np.asarray(keep, dtype=int).reshape(-1))
    if keep.size and (keep[0] < 0 or keep[-1] >= M):
        raise InputError(f"keep indices out of range for model order {M}")
    if keep.size == M:
        return 0.0
    K = f_tilde.kernel.matrix(f_tilde.points, f_tilde.points)
    Kw = K @ f_tilde.weights
    r = f_tilde.weights.copy()
    if keep.size:
        r[keep] -= psd_solve(K[np.ix_(keep, keep)], Kw[keep])
    group, first = _point_groups(f_tilde.points)
    return _merged_residual_norm(K, group, first, r)


def refit_weights(k: Kernel, D, f_tilde: KernelExpansion) -> np.ndarray:
    """Weights ``w`` on dictionary ``D`` with ``w^T k_D(.)`` the projection of ``f_tilde``.

    Solves the normal equations ``K_DD w = K_{D,D~} w~``.
    """
    D = as_points(D, f_tilde.dim) if np.size(D) else np.zeros((0, f_tilde.dim))
    if D.shape[0] == 0:
        return np.zeros(0)
    if f_tilde.order == 0:
        return np.zeros(D.shape[0])
    rhs = k.matrix(D, f_tilde.points) @ f_tilde.weights
    return psd_solve(k.matrix(D, D), rhs)


def _drop_zero_cost(group: np.ndarray, wt: np.ndarray, removed: list):
    """Remove atoms whose removal error is exactly zero, lowest index first.

    While the representation is still exact, an atom with zero weight or with
    a bit-identical twin can go at no cost; the surviving weights follow by
    bookkeeping (a twin absorbs the weight) rather than by a refit.  These are
    the first picks of the greedy rule since their error is the minimum 0.
    """
    alive = np.arange(wt.shape[0])
    w = wt.copy()
    while alive.size:
        g = group[alive]
        twin_count = np.bincount(g)[g]
        cand = np.flatnonzero((w == 0.0) | (twin_count > 1))
        if cand.size == 0:
            break
        j = int(cand[0])
        if twin_count[j] > 1:
            twins = np.flatnonzero(g == g[j])
            w[twins[twins != j][0]] += w[j]
        removed.append(int(alive[j]))
        alive = np.delete(alive, j)
        w = np.delete(w, j)
    return alive, w


def komp_prune(f_tilde: KernelExpansion, eps: float, w_max: float = DEFAULT_W_MAX) -> PruneResult:
    """Greedily prune ``f_tilde`` within Hilbert-norm budget ``eps``.

    Parameters
    ----------
    f_tilde : KernelExpansion
        Candidate function; its dictionary indexes ``removed_indices``.
    eps : float
        Approximation budget, ``>= 0``.
    w_max : float
        The returned weight vector is rescaled to this Euclidean norm if it
        grows beyond it.

    Returns
    -------
    PruneResult
        ``final_error`` is ``||f - f_tilde||_H`` measured directly.
    """
    if not eps >= 0:
        raise InputError(f"compression budget must be >= 0, got {eps!r}")
    M = f_tilde.order
    if M == 0:
        return PruneResult(f_tilde, (), 0.0)

    kern = f_tilde.kernel
    P, wt = f_tilde.points, f_tilde.weights
    group, first = _point_groups(P)
    removed = []
    alive, w = _drop_zero_cost(group, wt, removed)

    # Past the exact phase every remaining atom has gamma_j > 0 whenever the
    # kernel is strictly positive definite, so a zero budget stops here.
    if eps == 0 and kern.strictly_pd:
        return PruneResult(KernelExpansion(kern, P[alive], w), tuple(removed), 0.0)

    K = kern.matrix(P, P)
    Kwt = K @ wt
    Kinv = psd_inverse(K[np.ix_(alive, alive)])
    err_sq = 0.0
    while alive.size:
        diag = np.diag(Kinv)
        dist_sq = np.divide(1.0, diag, out=np.zeros_like(diag), where=diag > 0)
        gamma_sq = err_sq + w * w * dist_sq
        j = int(np.argmin(gamma_sq))
        if np.sqrt(max(gamma_sq[j], 0.0)) > eps:
            break
        removed.append(int(alive[j]))
        err_sq = max(float(gamma_sq[j]), 0.0)
        rest = np.delete(np.arange(alive.size), j)
        alive = alive[rest]
        if diag[j] < _DOWNDATE_LIMIT:
            col = Kinv[rest, j]
            Kinv = Kinv[np.ix_(rest, rest)] - np.outer(col, col) / diag[j]
        else:
            Kinv = psd_inverse(K[np.ix_(alive, alive)])
        w = Kinv @ Kwt[alive]

    if removed:
        norm = float(np.linalg.norm(w))
        if norm > w_max:
            w = w * (w_max / norm)
    r = wt.copy()
    r[alive] -= w
    final_error = _merged_residual_norm(K, group, first, r)
    return PruneResult(KernelExpansion(kern, P[alive], w), tuple(removed), final_error)
