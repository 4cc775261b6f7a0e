"""Generalized advantage estimation."""

from __future__ import annotations

import numpy as np

from ..errors import LengthMismatch


def gae(rewards, values, dones=None, gamma: float = 0.99, lam: float = 0.95,
        ) -> tuple[np.ndarray, np.ndarray]:
    """Advantages and value targets for one trajectory or a (T, n_envs) batch.

    ``values`` carries one extra bootstrap entry along the time axis. A done at
    step t cuts both the bootstrap and the advantage recursion after t.
    """
    r = np.asarray(rewards, float)
    v = np.asarray(values, float)
    if v.shape[0] != r.shape[0] + 1 or v.shape[1:] != r.shape[1:]:
        raise LengthMismatch(f"values must have one more step than rewards: {v.shape} vs {r.shape}")
    d = np.zeros_like(r) if dones is None else np.asarray(dones, float)
    if d.shape != r.shape:
        raise LengthMismatch(f"dones shape {d.shape} != rewards shape {r.shape}")
    adv = np.zeros_like(r)
    last = np.zeros(r.shape[1:])
    for t in range(r.shape[0] - 1, -1, -1):
        live = 1.0 - d[t]
        delta = r[t] + gamma * v[t + 1] * live - v[t]
        last = delta + gamma * lam * live * last
        adv[t] = last
    return adv, adv + v[:-1]


def normalize_advantages(adv: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """Zero mean, unit (population) SD over the whole batch; constant input maps to zeros."""
    a = np.asarray(adv, float)
    centred = a - a.mean()
    sd = np.sqrt(np.mean(centred**2))
    out = centred / sd if sd > eps else np.zeros_like(centred)
    # one more centring pass removes the roundoff left by the division
    return out - out.mean()
