"""Independent loop-based formulas used as test oracles.

They work from the pairing matrix gamma (K x U), explicit decoding positions
and raw channel vectors, never from the library's gain table.
"""
import math

import numpy as np

from starnoma.channel import ChannelRealization, StarRisState
from starnoma.environment import AdjacencyIndicators


def inner_power(h, w):
    s = 0j
    for n in range(len(h)):
        s += np.conj(h[n]) * w[n]
    return abs(s) ** 2


def equivalent_gain(u, k, H, W, gamma, sigma2):
    K, U = gamma.shape
    den = sigma2
    for k2 in range(K):
        if k2 == k:
            continue
        for u2 in range(U):
            if gamma[k2, u2]:
                den += inner_power(H[u], W[k2])
    return inner_power(H[u], W[k]) / den


def intra(k, u, H, W, gamma, pos, p0):
    total = 0.0
    for u2 in range(gamma.shape[1]):
        if gamma[k, u2] and pos[u2] > pos[u]:
            total += gamma[k, u2] * p0
    return inner_power(H[u], W[k]) * total


def inter(k, u, H, W, gamma):
    total = 0.0
    for k2 in range(gamma.shape[0]):
        if k2 == k:
            continue
        for u2 in range(gamma.shape[1]):
            total += gamma[k2, u2] * inner_power(H[u], W[k2])
    return total


def sinr(k, u, H, W, gamma, pos, p0, sigma2):
    num = inner_power(H[u], W[k]) * gamma[k, u] * p0
    return num / (intra(k, u, H, W, gamma, pos, p0) + inter(k, u, H, W, gamma) + sigma2)


def cross_sinr(k, v, u, H, W, gamma, pos, p0, sigma2):
    num = inner_power(H[v], W[k]) * gamma[k, v] * p0
    later = 0.0
    for u2 in range(gamma.shape[1]):
        if gamma[k, u2] and pos[u2] > pos[u]:
            later += gamma[k, u2] * p0
    i_intra = inner_power(H[v], W[k]) * later
    return num / (i_intra + inter(k, v, H, W, gamma) + sigma2)


def correlation(i, j, H):
    num = 0j
    for n in range(H.shape[1]):
        num += np.conj(H[i, n]) * H[j, n]
    ni = np.sqrt(sum(abs(x) ** 2 for x in H[i]))
    nj = np.sqrt(sum(abs(x) ** 2 for x in H[j]))
    return abs(num) / (ni * nj)


def cluster_correlation(u, clusters, H):
    own = [k for k, c in enumerate(clusters) if u in c][0]
    return sum(correlation(u, v, H) for k, c in enumerate(clusters) if k != own for v in c)


def gae_recursion(rewards, values, gamma, lam):
    N = len(rewards)
    adv = [0.0] * (N + 1)
    for n in range(N - 1, -1, -1):
        delta = rewards[n] + gamma * values[n + 1] - values[n]
        adv[n] = delta + gamma * lam * adv[n + 1]
    return np.array(adv[:N])


def gae_explicit_sum(rewards, values, gamma, lam):
    N = len(rewards)
    deltas = [rewards[n] + gamma * values[n + 1] - values[n] for n in range(N)]
    return np.array([sum((gamma * lam) ** (i - n) * deltas[i] for i in range(n, N)) for n in range(N)])


def orthogonal_groups(rng, n_per_group=5, n_antennas=4, noise=0.1):
    """Two groups of channels along orthogonal base vectors plus relative noise.

    Returns (H, truth) with H shaped (2 * n_per_group, n_antennas).
    """
    q, _ = np.linalg.qr(rng.standard_normal((n_antennas, n_antennas))
                        + 1j * rng.standard_normal((n_antennas, n_antennas)))
    truth = rng.permutation(np.r_[np.zeros(n_per_group, int), np.ones(n_per_group, int)])
    H = np.empty((truth.size, n_antennas), complex)
    for u, g in enumerate(truth):
        s = q[:, g] * (rng.standard_normal() + 1j * rng.standard_normal())
        n = rng.standard_normal(n_antennas) + 1j * rng.standard_normal(n_antennas)
        H[u] = s + noise * np.linalg.norm(s) * n / np.linalg.norm(n)
    return H, truth


def same_partition(a, b) -> bool:
    a, b = np.asarray(a), np.asarray(b)
    return all((a == a[i]).tolist() == (b == b[i]).tolist() for i in range(a.size))


def scalar_expansion(real, adj, state, u):
    """Combined channel written as explicit sums over surfaces and elements."""
    Nb = real.h.shape[1]
    out = np.zeros(Nb, complex)
    if adj.c_b_u[u]:
        out += real.h[u]
    L, _, M = real.g.shape
    for l in range(L):
        if not adj.c_b_l[l]:
            continue
        for side, c in (("F", adj.c_f[l, u]), ("B", adj.c_b[l, u])):
            if not c:
                continue
            beta = state.beta_f[l] if side == "F" else 1 - state.beta_f[l]
            theta = state.theta_f[l] if side == "F" else state.theta_b[l]
            for n in range(Nb):
                for m in range(M):
                    out[n] += real.g[l, n, m] * math.sqrt(beta[m]) * np.exp(1j * theta[m]) * real.g_lu[l, u, m]
    return out


def _cn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_instance(rng, U=5, Nb=3, L=2, M=4):
    real = ChannelRealization(_cn(rng, U, Nb), _cn(rng, L, Nb, M),
                              _cn(rng, L, U, M), 3.0)
    side = rng.integers(0, 3, (L, U))  # 0 none, 1 forward, 2 backward
    adj = AdjacencyIndicators(rng.integers(0, 2, U), rng.integers(0, 2, L),
                              (side == 1).astype(int), (side == 2).astype(int))
    state = StarRisState(rng.uniform(size=(L, M)), rng.uniform(0, 6.28, (L, M)),
                         rng.uniform(0, 6.28, (L, M)))
    return real, adj, state
