"""Training loops: multi-agent PPO, single-agent PPO, multi-agent A2C, random.

Every loop shares the rollout: per episode a fresh deployment and pairing,
``steps`` time slots in which the agents act on the shared observation and
receive the common min-rate reward, then one update per agent.

Randomness is split into two streams derived from the seed: the episode
stream (deployment, fading, pairing initialization) depends only on
(seed, episode), so every algorithm sees the same sequence of deployments,
and the agent stream drives initialization, sampling and minibatches.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..channel import StarRisState
from ..noma import ClusterAssignment
from .env import EnvConfig, StarNomaEnv
from .ppo import Agent, HyperParams, RewardScaler

ALGORITHMS = ("mappo", "ppo", "a2c", "random")


def episode_rng(seed: int, episode: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 0, int(episode)])))


def agent_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 1])))


@dataclass
class EpisodeRecord:
    episode: int
    mean_reward: float
    min_rate: float
    sum_rate: float


@dataclass
class Snapshot:
    """Final-slot configuration of an episode, enough to recompute its rates."""

    mus: np.ndarray
    realization: object
    assignment: ClusterAssignment
    w: np.ndarray
    state: StarRisState


@dataclass
class TrainResult:
    algorithm: str
    seed: int
    agents: dict
    trace: list[EpisodeRecord]
    snapshots: list[Snapshot] = field(default_factory=list)
    feasibility_checks: int = 0
    feasibility_violations: list = field(default_factory=list)
    wall_clock: float = 0.0

    def rewards(self) -> np.ndarray:
        return np.array([r.mean_reward for r in self.trace])

    def final_mean(self, window: int = 50) -> float:
        return float(self.rewards()[-window:].mean())


def make_agents(algorithm: str, env: StarNomaEnv, hp: HyperParams, rng) -> dict:
    if algorithm in ("mappo", "a2c"):
        return {"active": Agent("active", env.obs_dim, env.active_dim, hp, rng),
                "passive": Agent("passive", env.obs_dim, env.passive_dim, hp, rng)}
    if algorithm == "ppo":
        return {"joint": Agent("joint", env.obs_dim, env.active_dim + env.passive_dim, hp, rng)}
    if algorithm == "random":
        return {}
    raise ValueError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")


def split_joint(env: StarNomaEnv, action):
    return action[: env.active_dim], action[env.active_dim:]


def train(algorithm: str, env_cfg: EnvConfig, hp: HyperParams, seed: int,
          episodes: int | None = None, keep_snapshots: bool = False,
          step_hook=None, base_layout=None) -> TrainResult:
    """Run one (algorithm, seed) cell and return its agents and reward trace.

    ``step_hook(env, step_result)`` is called after every environment step;
    ``base_layout`` replaces the built-in geometry.
    """
    start = time.perf_counter()
    episodes = hp.episodes if episodes is None else episodes
    env = StarNomaEnv(env_cfg, base_layout)
    arng = agent_rng(seed)
    agents = make_agents(algorithm, env, hp, arng)
    scalers = {name: RewardScaler(hp.gamma) for name in agents}
    update_kind = "a2c" if algorithm == "a2c" else "ppo"

    trace, snapshots = [], []
    for ep in range(episodes):
        obs = env.reset(episode_rng(seed, ep))
        rewards = []
        for n in range(hp.steps):
            done = n == hp.steps - 1
            if algorithm == "random":
                a_act = arng.standard_normal(env.active_dim)
                a_pas = arng.standard_normal(env.passive_dim)
                picks = {}
            else:
                picks = {name: ag.act(obs, arng) for name, ag in agents.items()}
                if "joint" in picks:
                    a_act, a_pas = split_joint(env, picks["joint"][0])
                else:
                    a_act, a_pas = picks["active"][0], picks["passive"][0]
            res = env.step(a_act, a_pas)
            if step_hook is not None:
                step_hook(env, res)
            rewards.append(res.reward)
            for name, (act, logp, value) in picks.items():
                r = scalers[name](res.reward, done) if hp.scale_rewards else res.reward
                # the slot budget is a time limit, not a terminal state: the last
                # slot bootstraps from the critic's value of the successor observation
                boot = agents[name].value(res.obs) if done else 0.0
                agents[name].remember(obs, act, logp, r, value, done, boot)
            obs = res.obs
        for ag in agents.values():
            ag.update(arng, update_kind)
        trace.append(EpisodeRecord(ep, float(np.mean(rewards)), float(res.rates.min()),
                                   float(res.rates.sum())))
        if keep_snapshots:
            snapshots.append(Snapshot(env.layout.mus.copy(), env.real, env.assignment,
                                      res.w.copy(), res.state))
    return TrainResult(algorithm, seed, agents, trace, snapshots, env.feasibility_checks,
                       list(env.feasibility_violations), time.perf_counter() - start)


def train_mappo(env_cfg, hp, seed, **kw) -> TrainResult:
    return train("mappo", env_cfg, hp, seed, **kw)


def train_ppo_single(env_cfg, hp, seed, **kw) -> TrainResult:
    return train("ppo", env_cfg, hp, seed, **kw)


def train_a2c(env_cfg, hp, seed, **kw) -> TrainResult:
    return train("a2c", env_cfg, hp, seed, **kw)


def train_random(env_cfg, hp, seed, **kw) -> TrainResult:
    return train("random", env_cfg, hp, seed, **kw)


def greedy_actions(agents: dict, env: StarNomaEnv, obs):
    """Deterministic (mean) actions of trained agents."""
    if "joint" in agents:
        return split_joint(env, agents["joint"].policy.mode(obs))
    return agents["active"].policy.mode(obs), agents["passive"].policy.mode(obs)
