"""NOMA decoding order, interference, SINR, rates and feasibility checks.

Every quantity is built from the beam-gain table ``S[u, k] = |h_u^H w_k|^2``,
where ``h_u`` is MU u's combined channel and ``w_k`` the beam of cluster k.
Inter-cluster interference carries no power-allocation coefficient while
intra-cluster interference does; both follow the downlink model literally.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import TWO_PI, StarRisState


class DecodingOrderError(ValueError):
    """A cross-SINR was requested for a pair in the wrong decoding order."""


@dataclass(frozen=True)
class ClusterAssignment:
    """Cluster label per MU; labels are 0..K-1."""

    labels: np.ndarray
    n_clusters: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int)
        object.__setattr__(self, "labels", labels)
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_clusters):
            raise ValueError("cluster label out of range")

    @property
    def gamma(self) -> np.ndarray:
        """Binary pairing matrix, shape (K, U)."""
        g = np.zeros((self.n_clusters, self.labels.size), dtype=int)
        g[self.labels, np.arange(self.labels.size)] = 1
        return g

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.labels == k)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_clusters)

    def is_valid(self) -> bool:
        return bool(np.all(self.gamma.sum(axis=0) == 1) and np.all(self.sizes() > 0))

    @classmethod
    def from_gamma(cls, gamma) -> "ClusterAssignment":
        gamma = np.asarray(gamma)
        if np.any(gamma.sum(axis=0) != 1):
            raise ValueError("each MU must belong to exactly one cluster")
        return cls(np.argmax(gamma, axis=0), gamma.shape[0])


@dataclass(frozen=True)
class DecodingOrder:
    """``sequence[k]`` lists cluster k's members from first to last decoded."""

    sequence: tuple[tuple[int, ...], ...]
    position: np.ndarray = field(repr=False)

    @classmethod
    def from_sequences(cls, sequences, n_mus: int) -> "DecodingOrder":
        pos = np.full(n_mus, -1, dtype=int)
        for seq in sequences:
            for i, u in enumerate(seq):
                pos[u] = i
        return cls(tuple(tuple(int(u) for u in s) for s in sequences), pos)


@dataclass(frozen=True)
class NomaParams:
    n_mus: int
    sigma2: float
    p_max: float
    r_min: np.ndarray | float = 0.1

    @property
    def p0(self) -> float:
        return 1.0 / self.n_mus

    def r_min_vector(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.r_min, dtype=float), (self.n_mus,))


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def noise_power(density_dbm_hz: float = -100.0, bandwidth_hz: float = 10e6) -> float:
    return dbm_to_watts(density_dbm_hz + 10.0 * np.log10(bandwidth_hz))


def beam_gains(hhat: np.ndarray, w: np.ndarray) -> np.ndarray:
    """S[u, k] = |h_u^H w_k|^2 for hhat (U, N_b) and w (K, N_b)."""
    return np.abs(hhat.conj() @ w.T) ** 2


def _other_cluster_load(S, assignment: ClusterAssignment) -> np.ndarray:
    """T[u, k] = sum over k' != k, u' in C_k' of S[u, k']."""
    weighted = S * assignment.sizes()[None, :]
    return weighted.sum(axis=1, keepdims=True) - weighted


def equivalent_gains(S, assignment: ClusterAssignment, sigma2: float) -> np.ndarray:
    """Equivalent-combined channel gain of each MU in its own cluster, shape (U,)."""
    T = _other_cluster_load(S, assignment)
    u = np.arange(S.shape[0])
    k = assignment.labels
    return S[u, k] / (T[u, k] + sigma2)


def equivalent_gain(u: int, k: int, S, assignment: ClusterAssignment, sigma2: float) -> float:
    return float(S[u, k] / (_other_cluster_load(S, assignment)[u, k] + sigma2))


def decoding_order(S, assignment: ClusterAssignment, sigma2: float) -> DecodingOrder:
    """Ascending equivalent gain within each cluster; ties by MU index."""
    g = equivalent_gains(S, assignment, sigma2)
    seqs = []
    for k in range(assignment.n_clusters):
        members = assignment.members(k)
        # lexsort: last key is primary
        seqs.append(members[np.lexsort((members, g[members]))])
    return DecodingOrder.from_sequences(seqs, S.shape[0])


def _later_count(u: int, order: DecodingOrder, assignment: ClusterAssignment) -> int:
    k = assignment.labels[u]
    return len(order.sequence[k]) - 1 - int(order.position[u])


def intra_interference(k: int, u: int, S, assignment, order: DecodingOrder, p0: float) -> float:
    return float(S[u, k] * _later_count(u, order, assignment) * p0)


def inter_interference(k: int, u: int, S, assignment) -> float:
    return float(_other_cluster_load(S, assignment)[u, k])


def sinr(k: int, u: int, S, assignment, order, params: NomaParams) -> float:
    p0 = params.p0
    gamma = 1.0 if assignment.labels[u] == k else 0.0
    num = S[u, k] * gamma * p0
    den = (intra_interference(k, u, S, assignment, order, p0)
           + inter_interference(k, u, S, assignment) + params.sigma2)
    return float(num / den)


def rate(k: int, u: int, S, assignment, order, params: NomaParams) -> float:
    return float(np.log2(1.0 + sinr(k, u, S, assignment, order, params)))


def cross_sinr(k: int, v: int, u: int, S, assignment, order, params: NomaParams) -> float:
    """SINR of u's signal when decoded at v, for v decoded after u in cluster k."""
    if v != u and not order.position[v] > order.position[u]:
        raise DecodingOrderError(f"MU {v} is not decoded after MU {u}")
    p0 = params.p0
    gamma_v = 1.0 if assignment.labels[v] == k else 0.0
    num = S[v, k] * gamma_v * p0
    intra = S[v, k] * _later_count(u, order, assignment) * p0
    inter = _other_cluster_load(S, assignment)[v, k]
    return float(num / (intra + inter + params.sigma2))


def all_sinrs(S, assignment: ClusterAssignment, order: DecodingOrder, params: NomaParams) -> np.ndarray:
    """Vectorised SINR of every MU in its own cluster, shape (U,)."""
    U = S.shape[0]
    u = np.arange(U)
    k = assignment.labels
    later = assignment.sizes()[k] - 1 - order.position
    own = S[u, k]
    inter = _other_cluster_load(S, assignment)[u, k]
    return own * params.p0 / (own * later * params.p0 + inter + params.sigma2)


def all_rates(S, assignment, order, params) -> np.ndarray:
    return np.log2(1.0 + all_sinrs(S, assignment, order, params))


@dataclass(frozen=True)
class SicViolation:
    cluster: int
    weak: int
    strong: int
    sinr_at_strong: float
    sinr_own: float


def sic_audit(S, assignment, order, params, rtol: float = 1e-12) -> list[SicViolation]:
    """Pairs where a later-decoded MU cannot decode an earlier MU's signal.

    ``rtol`` absorbs rounding when two MUs have equal equivalent gain.
    """
    violations = []
    for k, seq in enumerate(order.sequence):
        for i, u in enumerate(seq):
            own = sinr(k, u, S, assignment, order, params)
            for v in seq[i + 1:]:
                cross = cross_sinr(k, v, u, S, assignment, order, params)
                if cross < own * (1.0 - rtol):
                    violations.append(SicViolation(k, u, v, cross, own))
    return violations


@dataclass(frozen=True)
class Evaluation:
    sum_rate: float
    min_rate: float
    rates: np.ndarray
    violated: tuple[str, ...]


def objective_and_feasibility(hhat, w, assignment: ClusterAssignment, state: StarRisState,
                              params: NomaParams, order: DecodingOrder | None = None,
                              atol: float = 1e-12) -> Evaluation:
    """Sum rate, min rate and the list of violated problem constraints.

    Constraint tags: ``16b`` rate floor, ``16e`` power budget, ``16f``
    amplitude range, ``16g`` energy split, ``16h`` phase range.
    """
    S = beam_gains(hhat, w)
    if order is None:
        order = decoding_order(S, assignment, params.sigma2)
    rates = all_rates(S, assignment, order, params)
    violated = []
    if np.any(rates < params.r_min_vector()):
        violated.append("16b")
    if float(np.sum(np.abs(w) ** 2)) > params.p_max * (1.0 + atol):
        violated.append("16e")
    if np.any(state.beta_f < 0) or np.any(state.beta_f > 1) or np.any(state.beta_b < 0):
        violated.append("16f")
    if np.any(np.abs(state.beta_f + state.beta_b - 1.0) > atol):
        violated.append("16g")
    phases = np.concatenate([state.theta_f.ravel(), state.theta_b.ravel()])
    if np.any(phases < 0) or np.any(phases >= TWO_PI):
        violated.append("16h")
    return Evaluation(float(rates.sum()), float(rates.min()) if rates.size else 0.0,
                      rates, tuple(violated))
