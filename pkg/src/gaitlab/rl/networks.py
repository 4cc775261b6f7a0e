"""Actor and critic networks, observation normalizer."""

from __future__ import annotations

import math

import numpy as np
import torch
from torch import nn

LOG_2 = math.log(2.0)


def mlp(n_in: int, hidden: tuple[int, ...], n_out: int, out_gain: float = 1.0) -> nn.Sequential:
    layers: list[nn.Module] = []
    last = n_in
    for h in hidden:
        lin = nn.Linear(last, h)
        nn.init.orthogonal_(lin.weight, math.sqrt(2))
        nn.init.zeros_(lin.bias)
        layers += [lin, nn.Tanh()]
        last = h
    out = nn.Linear(last, n_out)
    nn.init.orthogonal_(out.weight, out_gain)
    nn.init.zeros_(out.bias)
    layers.append(out)
    return nn.Sequential(*layers)


class SquashedGaussianActor(nn.Module):
    """Diagonal Gaussian over a latent ``z``; actions are ``low + (high-low)*(tanh z + 1)/2``.

    Log-probabilities are kept in latent space: the squashing Jacobian depends
    only on ``z``, so it cancels in PPO probability ratios. ``action_log_prob``
    adds it back when the density of the squashed action itself is wanted.
    """

    def __init__(self, n_obs: int, n_act: int, low: float, high: float,
                 hidden: tuple[int, ...] = (64, 64), init_log_std: float = -0.5):
        super().__init__()
        self.n_act = n_act
        self.low, self.high = float(low), float(high)
        self.mean_net = mlp(n_obs, hidden, n_act, out_gain=0.01)
        self.log_std = nn.Parameter(torch.full((n_act,), float(init_log_std)))

    def dist(self, obs: torch.Tensor) -> torch.distributions.Normal:
        return torch.distributions.Normal(self.mean_net(obs), self.log_std.exp().expand(obs.shape[0], -1))

    def squash(self, z: torch.Tensor) -> torch.Tensor:
        return self.low + (self.high - self.low) * 0.5 * (torch.tanh(z) + 1.0)

    def latent_log_prob(self, obs: torch.Tensor, z: torch.Tensor) -> torch.Tensor:
        return self.dist(obs).log_prob(z).sum(-1)

    def action_log_prob(self, obs: torch.Tensor, z: torch.Tensor) -> torch.Tensor:
        # d a / d z = (high-low)/2 * (1 - tanh(z)^2); written stably via softplus
        log_jac = math.log((self.high - self.low) / 2) + 2 * (LOG_2 - z - nn.functional.softplus(-2 * z))
        return self.latent_log_prob(obs, z) - log_jac.sum(-1)

    def sample(self, obs: torch.Tensor, generator: torch.Generator | None = None):
        d = self.dist(obs)
        eps = torch.randn(d.mean.shape, generator=generator, dtype=d.mean.dtype)
        z = d.mean + d.stddev * eps
        return z, self.squash(z), d.log_prob(z).sum(-1)

    def deterministic(self, obs: torch.Tensor) -> torch.Tensor:
        return self.squash(self.mean_net(obs))

    def entropy(self, obs: torch.Tensor) -> torch.Tensor:
        return self.dist(obs).entropy().sum(-1)


class Critic(nn.Module):
    def __init__(self, n_obs: int, hidden: tuple[int, ...] = (64, 64)):
        super().__init__()
        self.net = mlp(n_obs, hidden, 1)

    def forward(self, obs: torch.Tensor) -> torch.Tensor:
        return self.net(obs).squeeze(-1)


class ObsNormalizer:
    """Running mean/variance (parallel-merge form) with clipping."""

    def __init__(self, n: int, clip: float = 10.0):
        self.mean = np.zeros(n)
        self.var = np.ones(n)
        self.count = 1e-4
        self.clip = clip
        self.frozen = False

    def update(self, x: np.ndarray) -> None:
        if self.frozen:
            return
        x = np.atleast_2d(x)
        bm, bv, bn = x.mean(0), x.var(0), x.shape[0]
        delta = bm - self.mean
        tot = self.count + bn
        self.mean = self.mean + delta * bn / tot
        m2 = self.var * self.count + bv * bn + delta**2 * self.count * bn / tot
        self.var = m2 / tot
        self.count = tot

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.clip((x - self.mean) / np.sqrt(self.var + 1e-8), -self.clip, self.clip)

    def state_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "var": self.var.tolist(), "count": self.count}

    def load_state_dict(self, d: dict) -> None:
        self.mean = np.array(d["mean"], float)
        self.var = np.array(d["var"], float)
        self.count = float(d["count"])


class PolicyPair(nn.Module):
    """Human actor, optional exoskeleton actor, one shared critic."""

    def __init__(self, n_obs: int, hidden: tuple[int, ...] = (64, 64), with_exo: bool = False,
                 init_log_std: float = -0.5):
        super().__init__()
        self.n_obs = n_obs
        self.hidden = tuple(hidden)
        self.human = SquashedGaussianActor(n_obs, 12, 0.0, 1.0, hidden, init_log_std)
        self.exo = SquashedGaussianActor(n_obs, 1, -1.0, 0.0, hidden, init_log_std) if with_exo else None
        self.critic = Critic(n_obs, hidden)

    @property
    def with_exo(self) -> bool:
        return self.exo is not None

    def add_exo(self, init_log_std: float = -0.5) -> None:
        self.exo = SquashedGaussianActor(self.n_obs, 1, -1.0, 0.0, self.hidden, init_log_std)

    def layout(self) -> list[tuple[str, tuple[int, ...]]]:
        # sorted: an exo actor added after construction registers after the critic
        return sorted((k, tuple(v.shape)) for k, v in self.state_dict().items())
