"""GAE, the clipped surrogate loss with analytic gradients, and the agent update."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .nets import LOG_STD_MAX, LOG_STD_MIN, Adam, GaussianPolicy, Mlp, clip_grad_norm


@dataclass(frozen=True)
class HyperParams:
    gamma: float = 0.99
    lam: float = 0.95
    clip_eps: float = 0.2
    c1: float = 0.5
    c2: float = 0.01
    lr: float = 3e-4
    minibatch: int = 64
    epochs: int = 4
    episodes: int = 500
    steps: int = 10
    hidden: tuple[int, ...] = (256, 256)
    max_grad_norm: float = 0.5
    normalize_advantages: bool = True
    scale_rewards: bool = True

    def __post_init__(self):
        if not (0 < self.gamma <= 1 and 0 < self.lam <= 1):
            raise ValueError("gamma and lambda must lie in (0, 1]")
        if not 0 < self.clip_eps:
            raise ValueError("clip epsilon must be positive")
        if self.episodes < 1 or self.steps < 1 or self.epochs < 1 or self.minibatch < 1:
            raise ValueError("episodes, steps, epochs and minibatch must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


def gae(rewards, values, gamma: float, lam: float, dones=None):
    """Truncated generalized advantage estimates.

    ``values`` has one more entry than ``rewards``: the bootstrap value of the
    state after the last step.  ``dones[n]`` cuts the bootstrap after step n.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    N = rewards.size
    if values.size != N + 1:
        raise ValueError("values must have len(rewards) + 1 entries")
    notdone = np.ones(N) if dones is None else 1.0 - np.asarray(dones, dtype=float)
    deltas = rewards + gamma * values[1:] * notdone - values[:-1]
    adv = np.zeros(N)
    acc = 0.0
    for n in reversed(range(N)):
        acc = deltas[n] + gamma * lam * notdone[n] * acc
        adv[n] = acc
    return adv


@dataclass
class Batch:
    obs: np.ndarray
    act: np.ndarray
    logp_old: np.ndarray
    adv: np.ndarray
    returns: np.ndarray

    def __len__(self):
        return len(self.adv)

    def subset(self, idx) -> "Batch":
        return Batch(self.obs[idx], self.act[idx], self.logp_old[idx], self.adv[idx], self.returns[idx])


def ppo_loss(batch: Batch, policy: GaussianPolicy, critic: Mlp, hp: HyperParams,
             clip: bool = True):
    """Negated PPO objective  -mean[L_clip - c1 * L_vf + c2 * entropy].

    With ``clip=False`` the policy term is the plain advantage-weighted
    log-likelihood used by A2C.  Returns (loss, policy_grads, critic_grads, info).
    """
    B = len(batch)
    mean, mcache = policy.mean_net.forward(batch.obs)
    ls = policy.effective_log_std()
    std = np.exp(ls)
    z = (batch.act - mean) / std
    logp = np.sum(-0.5 * z**2 - ls - 0.5 * np.log(2 * np.pi), axis=1)
    A = batch.adv

    if clip:
        ratio = np.exp(logp - batch.logp_old)
        surr1 = ratio * A
        surr2 = np.clip(ratio, 1.0 - hp.clip_eps, 1.0 + hp.clip_eps) * A
        policy_term = np.minimum(surr1, surr2)
        dterm_dlogp = np.where(surr1 <= surr2, ratio * A, 0.0)
        clip_frac = float(np.mean(np.abs(ratio - 1.0) > hp.clip_eps))
    else:
        ratio = np.ones(B)
        policy_term = logp * A
        dterm_dlogp = A
        clip_frac = 0.0

    values, vcache = critic.forward(batch.obs)
    values = values[:, 0]
    vf = (values - batch.returns) ** 2
    entropy = policy.entropy()
    objective = np.mean(policy_term) - hp.c1 * np.mean(vf) + hp.c2 * entropy
    loss = -objective

    dlogp = -dterm_dlogp / B
    dmean = dlogp[:, None] * z / std
    g_mean = policy.mean_net.backward(mcache, dmean)
    g_ls = np.sum(dlogp[:, None] * (z**2 - 1.0), axis=0) - hp.c2
    g_ls = np.where((policy.log_std >= LOG_STD_MIN) & (policy.log_std <= LOG_STD_MAX), g_ls, 0.0)
    g_critic = critic.backward(vcache, (hp.c1 * 2.0 * (values - batch.returns) / B)[:, None])

    info = {"policy_term": float(np.mean(policy_term)), "value_loss": float(np.mean(vf)),
            "entropy": entropy, "clip_frac": clip_frac, "mean_ratio": float(np.mean(ratio))}
    return float(loss), [*g_mean, g_ls], g_critic, info


class RewardScaler:
    """Divides rewards by the running std of the discounted return."""

    def __init__(self, gamma: float):
        self.gamma = gamma
        self.ret = 0.0
        self.count, self.mean, self.m2 = 0, 0.0, 0.0

    def __call__(self, reward: float, done: bool) -> float:
        self.ret = self.gamma * self.ret + reward
        self.count += 1
        delta = self.ret - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (self.ret - self.mean)
        if done:
            self.ret = 0.0
        var = self.m2 / self.count if self.count > 1 else 0.0
        return reward / np.sqrt(var) if var > 0 else reward

    def state(self):
        return [self.ret, self.count, self.mean, self.m2]


class Agent:
    """One actor-critic pair with its own memory and optimizers."""

    def __init__(self, name: str, obs_dim: int, act_dim: int, hp: HyperParams, rng):
        self.name = name
        self.hp = hp
        self.policy = GaussianPolicy(obs_dim, act_dim, hp.hidden, rng)
        self.critic = Mlp([obs_dim, *hp.hidden, 1], rng)
        self.opt_pi = Adam(self.policy.params, hp.lr)
        self.opt_v = Adam(self.critic.params, hp.lr)
        self.clear()

    def clear(self):
        self.memory = {"obs": [], "act": [], "logp": [], "reward": [], "value": [], "done": [],
                       "bootstrap": []}

    def act(self, obs, rng):
        act, logp = self.policy.sample(obs, rng)
        value = float(self.critic(obs)[0])
        return act, float(logp), value

    def value(self, obs) -> float:
        return float(self.critic(obs)[0])

    def remember(self, obs, act, logp, reward, value, done, bootstrap: float = 0.0):
        """Store one transition.  ``done`` closes an episode segment; ``bootstrap`` is
        V(s_{N+1}) for that segment (zero for a true terminal, the critic's value of the
        successor state when the episode is merely cut off after N slots)."""
        for key, val in zip(("obs", "act", "logp", "reward", "value", "done", "bootstrap"),
                            (obs, act, logp, reward, value, done, bootstrap)):
            self.memory[key].append(val)

    def build_batch(self) -> Batch:
        m = self.memory
        value = np.asarray(m["value"], dtype=float)
        adv = np.empty(len(value))
        start = 0
        ends = [n for n, d in enumerate(m["done"]) if d]
        if not ends or ends[-1] != len(value) - 1:
            ends.append(len(value) - 1)  # open segment: bootstrap from whatever was stored last
        for end in ends:
            seg = slice(start, end + 1)
            values = np.append(value[seg], m["bootstrap"][end])
            adv[seg] = gae(m["reward"][seg], values, self.hp.gamma, self.hp.lam)
            start = end + 1
        returns = adv + value
        return Batch(np.asarray(m["obs"]), np.asarray(m["act"]), np.asarray(m["logp"]),
                     adv, returns)

    def update(self, rng, algorithm: str = "ppo") -> dict:
        batch = self.build_batch()
        if self.hp.normalize_advantages and len(batch) > 1:
            batch.adv = (batch.adv - batch.adv.mean()) / (batch.adv.std() + 1e-8)
        clip = algorithm == "ppo"
        epochs = self.hp.epochs if clip else 1
        info = {}
        for _ in range(epochs):
            idx = rng.permutation(len(batch)) if clip else np.arange(len(batch))
            step = self.hp.minibatch if clip else len(batch)
            for start in range(0, len(batch), step):
                mb = batch.subset(idx[start:start + step])
                _, g_pi, g_v, info = ppo_loss(mb, self.policy, self.critic, self.hp, clip=clip)
                g_pi, _ = clip_grad_norm(g_pi, self.hp.max_grad_norm)
                g_v, _ = clip_grad_norm(g_v, self.hp.max_grad_norm)
                self.opt_pi.step(g_pi)
                self.opt_v.step(g_v)
        self.clear()
        return info
