"""Correlation-based K-means pairing of MUs into NOMA clusters.

Channels that point the same way should share a beam, so clusters are grown
around representative MUs by maximum normalized channel correlation and the
representatives are re-picked to be the members least correlated with the
other clusters.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .noma import ClusterAssignment


class DegenerateChannelError(ValueError):
    """Correlation is undefined for an all-zero channel."""


def correlation(i: int, j: int, hhat: np.ndarray) -> float:
    hi, hj = hhat[i], hhat[j]
    ni, nj = np.linalg.norm(hi), np.linalg.norm(hj)
    if ni == 0 or nj == 0:
        raise DegenerateChannelError(f"zero channel for MU {i if ni == 0 else j}")
    return float(abs(np.vdot(hi, hj)) / (ni * nj))


def correlation_matrix(hhat: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(hhat, axis=1)
    if np.any(norms == 0):
        raise DegenerateChannelError(f"zero channel for MU {int(np.flatnonzero(norms == 0)[0])}")
    unit = hhat / norms[:, None]
    return np.minimum(np.abs(unit.conj() @ unit.T), 1.0)


def cluster_correlation(u: int, clusters: list[list[int]], cor: np.ndarray) -> float:
    """Total correlation between u and every MU outside u's own cluster."""
    own = next(k for k, c in enumerate(clusters) if u in c)
    return float(sum(cor[u, v] for k, c in enumerate(clusters) if k != own for v in c))


def update_representative(k: int, clusters: list[list[int]], cor: np.ndarray) -> int:
    members = sorted(clusters[k])
    if not members:
        raise ValueError(f"cluster {k} is empty")
    scores = [cluster_correlation(u, clusters, cor) for u in members]
    return members[int(np.argmin(scores))]  # argmin keeps the lowest index on ties


def _assign(reps: list[int], cor: np.ndarray) -> list[list[int]]:
    clusters = [[r] for r in reps]
    rep_set = set(reps)
    # ties go to the representative with the lowest MU index
    by_index = sorted(range(len(reps)), key=lambda k: reps[k])
    for u in range(cor.shape[0]):
        if u in rep_set:
            continue
        best = max(by_index, key=lambda k: (cor[u, reps[k]], -reps[k]))
        clusters[best].append(u)
    return clusters


def _intra_correlation(clusters, cor) -> float:
    return float(sum(cor[np.ix_(c, c)].sum() - len(c) for c in clusters))


@dataclass(frozen=True)
class PairingResult:
    assignment: ClusterAssignment
    representatives: tuple[int, ...]
    iterations: int
    converged: bool


def kmeans_pairing(hhat: np.ndarray, n_clusters: int, rng, max_iter: int = 100,
                   canonical: bool = True) -> PairingResult:
    """Cluster MUs around representatives until the representatives settle.

    With ``canonical`` the output labels are ordered by each cluster's lowest
    MU index, which makes labels comparable between runs.
    """
    U = hhat.shape[0]
    if not 1 <= n_clusters <= U:
        raise ValueError(f"need 1 <= K <= U, got K={n_clusters}, U={U}")
    cor = correlation_matrix(hhat)
    reps = [int(r) for r in rng.choice(U, size=n_clusters, replace=False)]

    best, best_score = None, -np.inf
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        clusters = _assign(reps, cor)
        score = _intra_correlation(clusters, cor)
        if score > best_score:
            best, best_score = reps, score
        new_reps = [update_representative(k, clusters, cor) for k in range(n_clusters)]
        if new_reps == reps:
            converged = True
            break
        reps = new_reps
    if not converged:
        reps = best
    clusters = _assign(reps, cor)

    labels = np.empty(U, dtype=int)
    order = sorted(range(n_clusters), key=lambda k: min(clusters[k])) if canonical \
        else range(n_clusters)
    out_reps = []
    for new_k, k in enumerate(order):
        labels[clusters[k]] = new_k
        out_reps.append(reps[k])
    return PairingResult(ClusterAssignment(labels, n_clusters), tuple(out_reps), it, converged)
