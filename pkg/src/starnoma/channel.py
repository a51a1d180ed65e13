"""Path loss, Rician fading, STAR-RIS operators and the combined AP-to-MU channel."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .environment import AdjacencyIndicators, Layout
from .numerics import sample_cn01

SPEED_OF_LIGHT = 299_792_458.0
TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class PathLossParams:
    carrier_freq_ghz: float = 6.0
    los_offset: float = 32.4
    los_slope: float = 17.3
    nlos_slope: float = 31.9
    freq_slope: float = 20.0

    def __post_init__(self):
        if self.carrier_freq_ghz <= 0:
            raise ValueError("carrier frequency must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / (self.carrier_freq_ghz * 1e9)


def path_loss_db(kind: str, distance_m: float, params: PathLossParams = PathLossParams()) -> float:
    """Indoor-hotspot path loss in dB; ``kind`` is ``"los"`` or ``"nlos"``."""
    if distance_m <= 0:
        raise ValueError(f"distance must be positive, got {distance_m}")
    slope = {"los": params.los_slope, "nlos": params.nlos_slope}[kind.lower()]
    return (params.los_offset + slope * np.log10(distance_m)
            + params.freq_slope * np.log10(params.carrier_freq_ghz))


def amplitude_gain(kind: str, distance_m: float, params: PathLossParams) -> float:
    return 10.0 ** (-path_loss_db(kind, distance_m, params) / 20.0)


def steering_vector(offsets, direction, wavelength: float) -> np.ndarray:
    """Unit-modulus array response; entry m has phase 2*pi/lambda * <offset_m, direction>."""
    offsets = np.atleast_2d(np.asarray(offsets, dtype=float))
    d = np.zeros(offsets.shape[1])
    direction = np.asarray(direction, dtype=float)
    d[: direction.size] = direction
    return np.exp(1j * TWO_PI / wavelength * offsets @ d)


def ula_offsets(n: int, wavelength: float, axis=(1.0, 0.0)) -> np.ndarray:
    """Half-wavelength uniform linear array in the horizontal plane, centered."""
    ax = np.array([axis[0], axis[1], 0.0])
    ax /= np.linalg.norm(ax)
    return np.outer((np.arange(n) - (n - 1) / 2) * wavelength / 2, ax)


@dataclass
class StarRisState:
    """Per-surface energy split and phases, arrays shaped (L, M).

    The backward amplitude is always derived as ``1 - beta_f`` so the
    energy-splitting constraint cannot drift.
    """

    beta_f: np.ndarray
    theta_f: np.ndarray
    theta_b: np.ndarray

    def __post_init__(self):
        self.beta_f = np.asarray(self.beta_f, dtype=float)
        self.theta_f = np.mod(np.asarray(self.theta_f, dtype=float), TWO_PI)
        self.theta_b = np.mod(np.asarray(self.theta_b, dtype=float), TWO_PI)
        # mod can return exactly 2*pi for tiny negative inputs
        self.theta_f[self.theta_f >= TWO_PI] = 0.0
        self.theta_b[self.theta_b >= TWO_PI] = 0.0
        if np.any(self.beta_f < 0) or np.any(self.beta_f > 1):
            raise ValueError("amplitudes must lie in [0, 1]")

    @property
    def beta_b(self) -> np.ndarray:
        return 1.0 - self.beta_f

    @classmethod
    def uniform(cls, n_surfaces: int, n_elements: int, beta_f: float = 0.5) -> "StarRisState":
        shape = (n_surfaces, n_elements)
        return cls(np.full(shape, beta_f), np.zeros(shape), np.zeros(shape))

    def coefficients(self, side: str) -> np.ndarray:
        """Diagonal entries sqrt(beta) * exp(j theta) for all surfaces, shape (L, M)."""
        if side.upper() == "F":
            return np.sqrt(self.beta_f) * np.exp(1j * self.theta_f)
        if side.upper() == "B":
            return np.sqrt(self.beta_b) * np.exp(1j * self.theta_b)
        raise ValueError(f"side must be 'F' or 'B', got {side!r}")


def phi_matrix(state: StarRisState, surface: int, side: str) -> np.ndarray:
    return np.diag(state.coefficients(side)[surface])


@dataclass
class ChannelRealization:
    """h: (U, N_b); g: (L, N_b, M); g_lu: (L, U, M)."""

    h: np.ndarray
    g: np.ndarray
    g_lu: np.ndarray
    kappa: float

    @property
    def n_antennas(self) -> int:
        return self.h.shape[1]


def _unit(v):
    return v / np.linalg.norm(v)


def los_components(layout: Layout, n_antennas: int, params: PathLossParams):
    """Deterministic unit-modulus LoS parts and link distances.

    Returns (h_los (U,N_b), g_los (L,N_b,M), glu_los (L,U,M), d_direct (U,),
    d_ap_ris (L,), d_ris_mu (L,U)).  Each LoS term carries the propagation
    phase exp(-j 2 pi d / lambda).
    """
    lam = params.wavelength
    ap = np.asarray(layout.ap, dtype=float)
    ap_off = ula_offsets(n_antennas, lam, layout.ap_axis)
    mus = layout.mu_positions_3d()
    U, L = layout.n_mus, layout.n_surfaces
    M = layout.surfaces[0].n_elements if L else 0

    h_los = np.zeros((U, n_antennas), complex)
    d_direct = np.zeros(U)
    for u, p in enumerate(mus):
        d = np.linalg.norm(p - ap)
        d_direct[u] = d
        h_los[u] = steering_vector(ap_off, _unit(p - ap), lam) * np.exp(-1j * TWO_PI * d / lam)

    g_los = np.zeros((L, n_antennas, M), complex)
    glu_los = np.zeros((L, U, M), complex)
    d_ap_ris = np.zeros(L)
    d_ris_mu = np.zeros((L, U))
    for l, s in enumerate(layout.surfaces):
        c = np.asarray(s.center, dtype=float)
        off = s.element_offsets()
        d = np.linalg.norm(c - ap)
        d_ap_ris[l] = d
        a_tx = steering_vector(ap_off, _unit(c - ap), lam)
        a_rx = steering_vector(off, _unit(ap - c), lam)
        g_los[l] = np.outer(a_tx, a_rx) * np.exp(-1j * TWO_PI * d / lam)
        for u, p in enumerate(mus):
            d = np.linalg.norm(p - c)
            d_ris_mu[l, u] = d
            glu_los[l, u] = steering_vector(off, _unit(p - c), lam) * np.exp(-1j * TWO_PI * d / lam)
    return h_los, g_los, glu_los, d_direct, d_ap_ris, d_ris_mu


def sample_channels(layout: Layout, adjacency: AdjacencyIndicators, n_antennas: int,
                    params: PathLossParams, rng, kappa: float = 3.0) -> ChannelRealization:
    """Rician draw of every link, scaled by its path-loss amplitude.

    Direct links use the LoS law when visible and the NLoS law otherwise;
    blocked links are still drawn and left for ``combined_channel`` to mask.
    """
    if kappa < 0:
        raise ValueError("Rician factor must be non-negative")
    h_los, g_los, glu_los, d_direct, d_ap_ris, d_ris_mu = los_components(
        layout, n_antennas, params)
    U, L = layout.n_mus, layout.n_surfaces
    M = g_los.shape[2]
    a_los = np.sqrt(kappa / (kappa + 1.0))
    a_nlos = np.sqrt(1.0 / (kappa + 1.0))

    amp_h = np.array([amplitude_gain("los" if adjacency.c_b_u[u] else "nlos", d_direct[u], params)
                      for u in range(U)])
    h = amp_h[:, None] * (a_los * h_los + a_nlos * sample_cn01(rng, U, n_antennas))

    amp_g = np.array([amplitude_gain("los", d, params) for d in d_ap_ris])
    g = amp_g[:, None, None] * (a_los * g_los
                                + a_nlos * sample_cn01(rng, L * n_antennas, M).reshape(L, n_antennas, M))

    amp_glu = np.vectorize(lambda d: amplitude_gain("los", d, params))(d_ris_mu) if L and U else np.zeros((L, U))
    g_lu = amp_glu[:, :, None] * (a_los * glu_los
                                  + a_nlos * sample_cn01(rng, L * U, M).reshape(L, U, M))
    return ChannelRealization(h=h, g=g, g_lu=g_lu, kappa=float(kappa))


def combined_channels(real: ChannelRealization, adj: AdjacencyIndicators,
                      state: StarRisState) -> np.ndarray:
    """All combined channels at once, shape (U, N_b)."""
    phi_f = state.coefficients("F")
    phi_b = state.coefficients("B")
    # per (l, u, m): effective surface coefficient times surface-to-MU gain
    coef = adj.c_b_l[:, None, None] * (adj.c_f[:, :, None] * phi_f[:, None, :]
                                       + adj.c_b[:, :, None] * phi_b[:, None, :])
    cascaded = np.einsum("lnm,lum->un", real.g, coef * real.g_lu)
    return adj.c_b_u[:, None] * real.h + cascaded


def combined_channel(real: ChannelRealization, adj: AdjacencyIndicators,
                     state: StarRisState, u: int) -> np.ndarray:
    """Combined channel of one MU as an (N_b, 1) column."""
    return combined_channels(real, adj, state)[u].reshape(-1, 1)


# ---- regression fixture format ----------------------------------------------
# Line-oriented text; every float is written with float.hex so a round trip is
# bit-exact:
#   starnoma-channel 1
#   kappa <hex>
#   array <name> <dim0> <dim1> [<dim2>]
#   <re hex> <im hex>        one line per entry, C order

def _write_array(lines, name, arr):
    lines.append(f"array {name} " + " ".join(map(str, arr.shape)))
    for z in arr.ravel():
        lines.append(f"{float(z.real).hex()} {float(z.imag).hex()}")


def dump_realization(real: ChannelRealization, path) -> None:
    lines = ["starnoma-channel 1", f"kappa {float(real.kappa).hex()}"]
    for name in ("h", "g", "g_lu"):
        _write_array(lines, name, getattr(real, name))
    Path(path).write_text("\n".join(lines) + "\n")


def load_realization(path) -> ChannelRealization:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].split() != ["starnoma-channel", "1"]:
        raise ValueError("not a channel realization file")
    kappa = float.fromhex(lines[1].split()[1])
    arrays = {}
    i = 2
    while i < len(lines):
        head = lines[i].split()
        if head[0] != "array":
            raise ValueError(f"line {i + 1}: expected an array header")
        name, shape = head[1], tuple(int(x) for x in head[2:])
        n = int(np.prod(shape))
        vals = np.empty(n, complex)
        for j in range(n):
            re, im = lines[i + 1 + j].split()
            vals[j] = complex(float.fromhex(re), float.fromhex(im))
        arrays[name] = vals.reshape(shape)
        i += 1 + n
    return ChannelRealization(h=arrays["h"], g=arrays["g"], g_lu=arrays["g_lu"], kappa=kappa)
