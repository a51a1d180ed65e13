"""Dense tanh networks with hand-written reverse-mode gradients."""
from __future__ import annotations

import numpy as np

LOG_STD_MIN, LOG_STD_MAX = -5.0, 1.0
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


class Mlp:
    """Fully connected network: tanh on hidden layers, linear output.

    ``params`` is the flat list ``[W0, b0, W1, b1, ...]`` with ``W`` shaped
    (fan_in, fan_out); inputs are batches of row vectors.
    """

    def __init__(self, sizes, rng=None, out_scale: float = 1.0):
        self.sizes = [int(s) for s in sizes]
        if len(self.sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.params = []
        for i, (n_in, n_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            if rng is None:
                W = np.zeros((n_in, n_out))
            else:
                W = rng.standard_normal((n_in, n_out)) / np.sqrt(n_in)
                if i == len(self.sizes) - 2:
                    W *= out_scale
            self.params += [W, np.zeros(n_out)]

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def n_params(self) -> int:
        return sum(p.size for p in self.params)

    def forward(self, x):
        """Returns (output, cache); ``x`` may be one vector or a batch."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        a = x[None, :] if single else x
        if a.shape[1] != self.sizes[0]:
            raise ValueError(f"input width {a.shape[1]} != {self.sizes[0]}")
        acts = [a]
        for i in range(self.n_layers):
            W, b = self.params[2 * i], self.params[2 * i + 1]
            z = a @ W + b
            a = np.tanh(z) if i < self.n_layers - 1 else z
            acts.append(a)
        out = a[0] if single else a
        return out, (acts, single)

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, dout):
        """Gradients of a scalar loss given dloss/doutput; same layout as params."""
        acts, single = cache
        delta = np.asarray(dout, dtype=float)
        if single:
            delta = delta[None, :]
        grads = [None] * len(self.params)
        for i in reversed(range(self.n_layers)):
            if i < self.n_layers - 1:
                delta = delta * (1.0 - acts[i + 1] ** 2)
            grads[2 * i] = acts[i].T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            if i > 0:
                delta = delta @ self.params[2 * i].T
        return grads

    def copy(self) -> "Mlp":
        twin = Mlp(self.sizes)
        twin.params = [p.copy() for p in self.params]
        return twin


class GaussianPolicy:
    """Diagonal Gaussian with a state-dependent mean and a learned log-std."""

    def __init__(self, obs_dim: int, act_dim: int, hidden=(256, 256), rng=None,
                 log_std_init: float = 0.0):
        self.mean_net = Mlp([obs_dim, *hidden, act_dim], rng, out_scale=0.01)
        self.log_std = np.full(act_dim, float(log_std_init))

    @property
    def params(self):
        return [*self.mean_net.params, self.log_std]

    @property
    def act_dim(self) -> int:
        return self.log_std.size

    def effective_log_std(self):
        return np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX)

    def log_prob(self, obs, act):
        mean = self.mean_net(obs)
        ls = self.effective_log_std()
        z = (np.asarray(act) - mean) / np.exp(ls)
        return np.sum(-0.5 * z**2 - ls - _HALF_LOG_2PI, axis=-1)

    def entropy(self) -> float:
        return float(np.sum(self.effective_log_std() + 0.5 + _HALF_LOG_2PI))

    def sample(self, obs, rng):
        mean = self.mean_net(obs)
        ls = self.effective_log_std()
        act = mean + np.exp(ls) * rng.standard_normal(mean.shape)
        z = (act - mean) / np.exp(ls)
        logp = np.sum(-0.5 * z**2 - ls - _HALF_LOG_2PI, axis=-1)
        return act, logp

    def mode(self, obs):
        return self.mean_net(obs)


class Adam:
    def __init__(self, params, lr: float = 3e-4, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr, self.b1, self.b2, self.eps = lr, betas[0], betas[1], eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def clip_grad_norm(grads, max_norm: float):
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if max_norm and total > max_norm:
        grads = [g * (max_norm / total) for g in grads]
    return grads, total
