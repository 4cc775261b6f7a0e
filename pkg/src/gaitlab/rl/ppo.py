"""Rollout collection and the clipped-surrogate PPO update."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np
import torch

from ..errors import NonFiniteLoss
from ..sim.env import VecWalkerEnv
from .config import TrainConfig
from .gae import gae, normalize_advantages
from .networks import ObsNormalizer, PolicyPair


@dataclass
class Batch:
    obs: np.ndarray  # (T, N, n_obs), normalized as seen by the networks
    z_human: np.ndarray  # (T, N, 12) latent (pre-squash) actions
    logp_human: np.ndarray  # (T, N)
    rewards: np.ndarray  # (T, N)
    values: np.ndarray  # (T + 1, N)
    dones: np.ndarray  # (T, N)
    z_exo: np.ndarray | None = None  # (T, N, 1)
    logp_exo: np.ndarray | None = None
    exo_actions: np.ndarray | None = None  # (T, N) squashed commands
    episode_returns: list[float] = field(default_factory=list)
    episode_lengths: list[int] = field(default_factory=list)
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    @property
    def n_samples(self) -> int:
        return self.rewards.size

    @property
    def action_dim(self) -> int:
        return self.z_human.shape[-1] + (0 if self.z_exo is None else self.z_exo.shape[-1])


def _tensor(x: np.ndarray) -> torch.Tensor:
    return torch.as_tensor(x, dtype=torch.float32)


@torch.no_grad()
def collect_rollout(env: VecWalkerEnv, policy: PolicyPair, normalizer: ObsNormalizer, steps: int,
                    generator: torch.Generator, obs: np.ndarray | None = None,
                    ) -> tuple[Batch, np.ndarray]:
    """Step all envs ``steps`` times; returns the batch and the next raw observation.

    Episodes that end (fall or timeout) reset inside the env and count as
    terminal for bootstrapping.
    """
    n = env.n
    raw = env.reset() if obs is None else obs
    n_obs = raw.shape[1]
    O = np.zeros((steps, n, n_obs), np.float32)
    Zh = np.zeros((steps, n, 12), np.float32)
    Lh = np.zeros((steps, n), np.float32)
    R = np.zeros((steps, n))
    V = np.zeros((steps + 1, n))
    D = np.zeros((steps, n))
    Ze = Le = Ae = None
    if policy.with_exo:
        Ze = np.zeros((steps, n, 1), np.float32)
        Le = np.zeros((steps, n), np.float32)
        Ae = np.zeros((steps, n))
    ep_ret: list[float] = []
    ep_len: list[int] = []
    for t in range(steps):
        normalizer.update(raw)
        o = _tensor(normalizer(raw))
        z, a, lp = policy.human.sample(o, generator)
        exo_cmd = None
        if policy.with_exo:
            ze, ae, lpe = policy.exo.sample(o, generator)
            Ze[t], Le[t] = ze.numpy(), lpe.numpy()
            exo_cmd = ae.numpy()[:, 0].astype(float)
            Ae[t] = exo_cmd
        O[t], Zh[t], Lh[t] = o.numpy(), z.numpy(), lp.numpy()
        V[t] = policy.critic(o).numpy()
        raw, rew, done, info = env.step(a.numpy().astype(float), exo_cmd)
        R[t], D[t] = rew, done
        ep_ret += info["episode_returns"]
        ep_len += info["episode_lengths"]
    V[steps] = policy.critic(_tensor(normalizer(raw))).numpy()
    batch = Batch(O, Zh, Lh, R, V, D, Ze, Le, Ae, ep_ret, ep_len)
    return batch, raw


def clipped_surrogate(ratio: torch.Tensor, adv: torch.Tensor, clip: float) -> torch.Tensor:
    """Mean of min(ratio * A, clip(ratio, 1 - c, 1 + c) * A)."""
    return torch.minimum(ratio * adv, torch.clamp(ratio, 1 - clip, 1 + clip) * adv).mean()


def prepare_advantages(batch: Batch, cfg: TrainConfig) -> None:
    adv, ret = gae(batch.rewards, batch.values, batch.dones, cfg.gamma, cfg.gae_lambda)
    batch.advantages = normalize_advantages(adv)
    batch.returns = ret


def ppo_update(batch: Batch, policy: PolicyPair, optimizer: torch.optim.Optimizer, cfg: TrainConfig,
               generator: torch.Generator) -> dict[str, float]:
    """``cfg.epochs`` passes over shuffled minibatches; both actors share the advantages.

    On a non-finite loss the policy and optimizer are restored to their state
    before the call and ``NonFiniteLoss`` is raised.
    """
    if batch.advantages is None:
        prepare_advantages(batch, cfg)
    n_obs = batch.obs.shape[-1]
    obs = _tensor(batch.obs.reshape(-1, n_obs))
    zh = _tensor(batch.z_human.reshape(-1, batch.z_human.shape[-1]))
    old_h = _tensor(batch.logp_human.reshape(-1))
    adv = _tensor(batch.advantages.reshape(-1))
    ret = _tensor(batch.returns.reshape(-1))
    if policy.with_exo:
        ze = _tensor(batch.z_exo.reshape(-1, 1))
        old_e = _tensor(batch.logp_exo.reshape(-1))
    total = obs.shape[0]
    mb = min(cfg.batch_size, total)

    saved = (copy.deepcopy(policy.state_dict()), copy.deepcopy(optimizer.state_dict()))
    sums = {"policy_loss": 0.0, "value_loss": 0.0, "kl": 0.0, "clip_fraction": 0.0, "entropy": 0.0}
    first_ratio_dev = None
    n_mb = 0
    for _epoch in range(cfg.epochs):
        perm = torch.randperm(total, generator=generator)
        for start in range(0, total, mb):
            idx = perm[start:start + mb]
            o = obs[idx]
            logp = policy.human.latent_log_prob(o, zh[idx])
            log_ratio = logp - old_h[idx]
            ratio = log_ratio.exp()
            pol_loss = -clipped_surrogate(ratio, adv[idx], cfg.clip_range)
            ratios = [ratio]
            log_ratios = [log_ratio]
            entropy = policy.human.entropy(o).mean()
            if policy.with_exo:
                lre = policy.exo.latent_log_prob(o, ze[idx]) - old_e[idx]
                re = lre.exp()
                pol_loss = pol_loss - clipped_surrogate(re, adv[idx], cfg.clip_range)
                ratios.append(re)
                log_ratios.append(lre)
                entropy = entropy + policy.exo.entropy(o).mean()
            v_loss = 0.5 * ((policy.critic(o) - ret[idx]) ** 2).mean()
            loss = pol_loss + cfg.value_coef * v_loss - cfg.entropy_coef * entropy
            if not torch.isfinite(loss):
                policy.load_state_dict(saved[0])
                optimizer.load_state_dict(saved[1])
                raise NonFiniteLoss(f"non-finite loss at epoch {_epoch}, minibatch start {start}")
            optimizer.zero_grad()
            loss.backward()
            if cfg.max_grad_norm > 0:
                torch.nn.utils.clip_grad_norm_(policy.parameters(), cfg.max_grad_norm)
            optimizer.step()
            with torch.no_grad():
                if first_ratio_dev is None:
                    first_ratio_dev = max(float((r - 1).abs().max()) for r in ratios)
                # (r - 1) - log r >= 0: a non-negative KL estimate
                kl = sum(float(((r - 1) - lr).mean()) for r, lr in zip(ratios, log_ratios))
                cf = float(torch.cat([((r - 1).abs() > cfg.clip_range).float() for r in ratios]).mean())
            sums["policy_loss"] += pol_loss.item()
            sums["value_loss"] += v_loss.item()
            sums["kl"] += kl
            sums["clip_fraction"] += cf
            sums["entropy"] += entropy.item()
            n_mb += 1
    stats = {k: v / max(n_mb, 1) for k, v in sums.items()}
    stats["first_ratio_dev"] = first_ratio_dev if first_ratio_dev is not None else 0.0
    stats["minibatches"] = n_mb
    if not all(math.isfinite(v) for v in stats.values()):
        policy.load_state_dict(saved[0])
        optimizer.load_state_dict(saved[1])
        raise NonFiniteLoss("non-finite training statistics")
    return stats
