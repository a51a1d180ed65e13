"""Episode environment shared by every learner.

One episode is one deployment: MU positions, channels and the pairing are
drawn at reset and held for all time slots (unless ``per_step_fading``).
Agent actions are projected onto the feasible set before evaluation, so
every configuration that reaches the rate computation is feasible.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..channel import (TWO_PI, ChannelRealization, PathLossParams, StarRisState,
                       combined_channels, sample_channels)
from ..environment import (Layout, compute_adjacency, load_layout, sample_reachable_deployment,
                           verification_layout)
from ..noma import (ClusterAssignment, NomaParams, all_rates, beam_gains, dbm_to_watts,
                    decoding_order, noise_power)
from ..pairing import kmeans_pairing


@dataclass(frozen=True)
class EnvConfig:
    n_mus: int = 10
    n_clusters: int = 4
    n_antennas: int = 4
    n_elements: int = 10
    carrier_ghz: float = 6.0
    kappa: float = 3.0
    bandwidth_hz: float = 10e6
    noise_dbm_hz: float = -100.0
    p_max_dbm: float = 20.0
    r_min: float = 0.1
    layout_source: str = "random"  # "random" redraws MUs each episode, "fixture" keeps them
    layout_path: str | None = None
    per_step_fading: bool = False
    grid: tuple[int, int] | None = None  # surface (M_h, M_v); None picks grid_for(n_elements)

    def __post_init__(self):
        if self.n_mus < self.n_clusters:
            raise ValueError("need at least as many MUs as clusters")
        if self.layout_source not in ("random", "fixture"):
            raise ValueError(f"unknown layout source {self.layout_source!r}")
        if self.grid is not None and self.grid[0] * self.grid[1] != self.n_elements:
            raise ValueError(f"grid {self.grid} does not hold {self.n_elements} elements")

    @property
    def p_max(self) -> float:
        return dbm_to_watts(self.p_max_dbm)

    @property
    def sigma2(self) -> float:
        return noise_power(self.noise_dbm_hz, self.bandwidth_hz)

    def noma_params(self) -> NomaParams:
        return NomaParams(self.n_mus, self.sigma2, self.p_max, self.r_min)

    def to_dict(self) -> dict:
        return asdict(self)


def grid_for(n_elements: int) -> tuple[int, int]:
    """Surface grid (M_h, M_v): five columns when M allows it, else one row."""
    return (5, n_elements // 5) if n_elements % 5 == 0 else (n_elements, 1)


def project_active_action(raw, n_antennas: int, n_clusters: int, p_max: float) -> np.ndarray:
    """Pair reals into complex beam entries and scale into the power budget.

    Returns beams shaped (K, N_b).  The result never exceeds ``p_max``.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.size != 2 * n_antennas * n_clusters:
        raise ValueError(f"expected {2 * n_antennas * n_clusters} reals, got {raw.size}")
    w = (raw[0::2] + 1j * raw[1::2]).reshape(n_clusters, n_antennas)
    power = float(np.sum(np.abs(w) ** 2))
    if power > p_max:
        w = w * np.sqrt(p_max / power)
        while float(np.sum(np.abs(w) ** 2)) > p_max:  # rounding can overshoot by an ulp
            w = w * (1.0 - 2.0**-52)
    return w


def project_passive_action(raw, n_surfaces: int, n_elements: int) -> StarRisState:
    """Per element (split logit, forward phase, backward phase), phases in radians."""
    raw = np.asarray(raw, dtype=float)
    if raw.size != 3 * n_surfaces * n_elements:
        raise ValueError(f"expected {3 * n_surfaces * n_elements} reals, got {raw.size}")
    r = raw.reshape(n_surfaces, n_elements, 3)
    beta_f = np.exp(-np.logaddexp(0.0, -r[..., 0]))  # overflow-safe sigmoid
    return StarRisState(beta_f, r[..., 1], r[..., 2])


@dataclass
class StepResult:
    obs: np.ndarray
    reward: float
    rates: np.ndarray
    w: np.ndarray
    state: StarRisState


class StarNomaEnv:
    """Active/passive beamforming environment with a min-rate reward."""

    def __init__(self, cfg: EnvConfig, base_layout: Layout | None = None):
        self.cfg = cfg
        if base_layout is not None:
            base = base_layout
        else:
            base = load_layout(cfg.layout_path) if cfg.layout_path else verification_layout()
        m_h, m_v = cfg.grid or grid_for(cfg.n_elements)
        self.template: Layout = base.with_grid(m_h, m_v)
        if cfg.layout_source == "fixture" and self.template.n_mus != cfg.n_mus:
            raise ValueError("fixture MU count does not match n_mus")
        self.pl = PathLossParams(cfg.carrier_ghz)
        self.params = cfg.noma_params()
        self.L = self.template.n_surfaces
        self.M = cfg.n_elements
        self.K = cfg.n_clusters
        self.Nb = cfg.n_antennas
        self.U = cfg.n_mus
        # unit-variance raw actions carry the full budget on average
        self.amp_scale = np.sqrt(self.params.p_max / (2 * self.Nb * self.K))
        self.chan_scale = np.sqrt(self.params.p_max / self.params.sigma2)
        self.feasibility_checks = 0
        self.feasibility_violations = []

    # ---- dimensions -------------------------------------------------------
    @property
    def active_dim(self) -> int:
        return 2 * self.Nb * self.K

    @property
    def passive_dim(self) -> int:
        return 3 * self.L * self.M

    @property
    def obs_dim(self) -> int:
        return self.K * self.U + 2 * self.Nb * self.K + 6 * self.L * self.M + 2 * self.Nb * self.U

    # ---- episode ----------------------------------------------------------
    def reset(self, rng, layout: Layout | None = None) -> np.ndarray:
        if layout is not None:
            self.layout = layout.with_grid(*(self.cfg.grid or grid_for(self.M)))
        elif self.cfg.layout_source == "fixture":
            self.layout = self.template
        else:
            self.layout = sample_reachable_deployment(rng, self.template, self.U)
        self.rng = rng
        self.adj = compute_adjacency(self.layout)
        self.real: ChannelRealization = sample_channels(
            self.layout, self.adj, self.Nb, self.pl, rng, self.cfg.kappa)
        self.state = StarRisState.uniform(self.L, self.M)
        self.w = np.zeros((self.K, self.Nb), complex)
        self.hhat = combined_channels(self.real, self.adj, self.state)
        self.pairing = kmeans_pairing(self.hhat, self.K, rng)
        self.assignment: ClusterAssignment = self.pairing.assignment
        return self.observe()

    def observe(self) -> np.ndarray:
        phi = np.stack([self.state.beta_f, self.state.beta_b,
                        np.cos(self.state.theta_f), np.sin(self.state.theta_f),
                        np.cos(self.state.theta_b), np.sin(self.state.theta_b)], axis=-1)
        w = self.w / self.amp_scale
        h = self.hhat * self.chan_scale
        return np.concatenate([
            self.assignment.gamma.ravel().astype(float),
            np.column_stack([w.real.ravel(), w.imag.ravel()]).ravel(),
            phi.ravel(),
            np.column_stack([h.real.ravel(), h.imag.ravel()]).ravel(),
        ])

    def decode(self, active_action, passive_action):
        w = project_active_action(np.asarray(active_action) * self.amp_scale,
                                  self.Nb, self.K, self.params.p_max)
        raw = np.asarray(passive_action, dtype=float).reshape(self.L, self.M, 3).copy()
        raw[..., 1:] *= np.pi  # unit action spans a half turn
        return w, project_passive_action(raw, self.L, self.M)

    def check_feasible(self, w, state: StarRisState):
        self.feasibility_checks += 1
        problems = []
        if float(np.sum(np.abs(w) ** 2)) > self.params.p_max:
            problems.append("power")
        if np.any(np.abs(state.beta_f + state.beta_b - 1.0) > 1e-12):
            problems.append("split")
        for th in (state.theta_f, state.theta_b):
            if np.any(th < 0) or np.any(th >= TWO_PI):
                problems.append("phase")
        if problems:
            self.feasibility_violations.append(problems)
        return problems

    def evaluate(self, w, state: StarRisState):
        hhat = combined_channels(self.real, self.adj, state)
        S = beam_gains(hhat, w)
        order = decoding_order(S, self.assignment, self.params.sigma2)
        return hhat, all_rates(S, self.assignment, order, self.params)

    def step(self, active_action, passive_action) -> StepResult:
        w, state = self.decode(active_action, passive_action)
        if self.check_feasible(w, state):
            raise AssertionError(f"infeasible action reached the channel: {self.feasibility_violations[-1]}")
        if self.cfg.per_step_fading:
            self.real = sample_channels(self.layout, self.adj, self.Nb, self.pl, self.rng,
                                        self.cfg.kappa)
        hhat, rates = self.evaluate(w, state)
        self.w, self.state, self.hhat = w, state, hhat
        return StepResult(self.observe(), float(rates.min()), rates, w, state)
