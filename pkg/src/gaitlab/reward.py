"""Imitation reward: joint position/velocity tracking, end-effector tracking, activation smoothness."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import GaitLabError, LengthMismatch, MissingEndEffector, MissingJoint
from .recording import (END_EFFECTORS, REF_PHASE_CHANNEL, TRACKED_JOINTS, GaitRecording, ReferenceTrajectory,
                        activation_channel, ee_channels, velocity_channel)

QPOS_SCALE = 8.0
QVEL_SCALE = 8.0
EE_SCALE = 5.0
DELTA_A_SCALE = 4.0


@dataclass(frozen=True)
class RewardConfig:
    w_qpos: float = 1.0
    w_qvel: float = 0.5
    w_ee: float = 1.0
    w_delta_a: float = 0.2
    joint_weights: Mapping[str, float] = field(default_factory=lambda: {j: 1.0 for j in TRACKED_JOINTS})
    rho: float = 1.0
    dt: float = 1.0 / 30.0
    joints: tuple[str, ...] = TRACKED_JOINTS
    end_effectors: tuple[str, ...] = END_EFFECTORS
    n_muscles: int = 12
    beta: float = 1.0  # exo reward weight in the joint objective; both agents share r

    def __post_init__(self):
        weights = (self.w_qpos, self.w_qvel, self.w_ee, self.w_delta_a)
        if any(w < 0 for w in weights) or any(w < 0 for w in self.joint_weights.values()):
            raise GaitLabError("reward weights must be non-negative")
        if not any(w > 0 for w in weights):
            raise GaitLabError("at least one reward term weight must be positive")
        if not (self.dt > 0 and self.rho > 0):
            raise GaitLabError("dt and rho must be positive")

    @classmethod
    def from_dict(cls, d: dict | None) -> RewardConfig:
        d = dict(d or {})
        if "joints" in d:
            d["joints"] = tuple(d["joints"])
        if "end_effectors" in d:
            d["end_effectors"] = tuple(d["end_effectors"])
        if "joint_weights" in d:
            jw = {j: 1.0 for j in d.get("joints", TRACKED_JOINTS)}
            jw.update(d["joint_weights"])
            d["joint_weights"] = jw
        return cls(**d)

    def upper_bound(self) -> float:
        wsum = sum(self.joint_weights[j] for j in self.joints)
        return self.dt * (self.w_qpos * wsum + self.w_qvel * wsum + self.w_ee + self.w_delta_a)


def _as_joint_map(values, joints) -> Mapping[str, float]:
    if isinstance(values, Mapping):
        return values
    arr = np.asarray(values, float)
    if arr.shape != (len(joints),):
        raise LengthMismatch(f"expected {len(joints)} joint values, got shape {arr.shape}")
    return dict(zip(joints, arr))


def _joint_errors(x, x_ref, joints) -> tuple[np.ndarray, np.ndarray]:
    x = _as_joint_map(x, joints)
    x_ref = _as_joint_map(x_ref, joints)
    for j in joints:
        if j not in x or j not in x_ref:
            raise MissingJoint(j)
    return np.array([x[j] for j in joints], float), np.array([x_ref[j] for j in joints], float)


def r_qpos(q, q_ref, cfg: RewardConfig) -> float:
    a, b = _joint_errors(q, q_ref, cfg.joints)
    w = np.array([cfg.joint_weights[j] for j in cfg.joints])
    return float(cfg.dt * np.sum(w * np.exp(-QPOS_SCALE * (a - b) ** 2)))


def r_qvel(qdot, qdot_ref, cfg: RewardConfig) -> float:
    a, b = _joint_errors(qdot, qdot_ref, cfg.joints)
    w = np.array([cfg.joint_weights[j] for j in cfg.joints])
    return float(cfg.dt * np.sum(w * np.exp(-QVEL_SCALE * (a - cfg.rho * b) ** 2)))


def _ee_array(p, names) -> np.ndarray:
    if isinstance(p, Mapping):
        for k in names:
            if k not in p:
                raise MissingEndEffector(k)
        return np.array([p[k] for k in names], float)
    arr = np.asarray(p, float)
    if arr.ndim != 2 or arr.shape[0] != len(names):
        raise MissingEndEffector(f"expected {len(names)} end-effector rows, got shape {arr.shape}")
    return arr


def r_ee(p, p_ref, cfg: RewardConfig) -> float:
    a = _ee_array(p, cfg.end_effectors)
    b = _ee_array(p_ref, cfg.end_effectors)
    d2 = np.sum((a - b) ** 2, axis=1)
    return float(cfg.dt * np.mean(np.exp(-EE_SCALE * d2)))


def r_delta_a(a_t, a_prev, cfg: RewardConfig) -> float:
    a = np.asarray(a_t, float)
    b = np.asarray(a_prev, float)
    if a.shape != b.shape or a.shape != (cfg.n_muscles,):
        raise LengthMismatch(f"activation lengths {a.shape} / {b.shape}, expected ({cfg.n_muscles},)")
    return float(cfg.dt * np.mean(np.exp(-DELTA_A_SCALE * (a - b) ** 2)))


@dataclass(frozen=True)
class RewardTerms:
    qpos: float
    qvel: float
    ee: float
    delta_a: float
    total: float


def reward_terms(q, q_ref, qdot, qdot_ref, p, p_ref, a_t, a_prev, cfg: RewardConfig) -> RewardTerms:
    tq = r_qpos(q, q_ref, cfg)
    tv = r_qvel(qdot, qdot_ref, cfg)
    te = r_ee(p, p_ref, cfg)
    ta = r_delta_a(a_t, a_prev, cfg)
    total = cfg.w_qpos * tq + cfg.w_qvel * tv + cfg.w_ee * te + cfg.w_delta_a * ta
    return RewardTerms(tq, tv, te, ta, total)


def total_reward(q, q_ref, qdot, qdot_ref, p, p_ref, a_t, a_prev, cfg: RewardConfig) -> float:
    """Weighted sum of the four imitation terms; human and exo agents both receive it."""
    return reward_terms(q, q_ref, qdot, qdot_ref, p, p_ref, a_t, a_prev, cfg).total


# --------------------------------------------------------- recording replay

TERMS = ("qpos", "qvel", "ee", "delta_a")


def _angle_channel(joint: str) -> str:
    name, side = joint.rsplit("_", 1)
    return f"q_{name}_{side}"


def reward_series(rec: GaitRecording, ref: ReferenceTrajectory, cfg: RewardConfig | None = None,
                  muscles: tuple[str, ...] | None = None) -> dict[str, np.ndarray]:
    """Per-sample unweighted terms (plus ``total``) for a recording against a reference.

    The reference phase comes from the ``ref_phase`` channel, or from the
    sample clock when absent. Joint velocities fall back to finite differences
    of the angles. Terms whose inputs are missing (end effectors, activations)
    are NaN and drop out of ``total``. The first sample has no previous
    activation, so its smoothness term compares the sample with itself.
    """
    from .sim.model import MUSCLES  # local: keeps the reward kernels free of the simulator

    cfg = cfg or RewardConfig()
    muscles = muscles or MUSCLES
    n = rec.n_samples
    chans = rec.channels
    phase = chans[REF_PHASE_CHANNEL] if REF_PHASE_CHANNEL in chans else (rec.time / ref.cycle_period) % 1.0
    q = np.column_stack([rec[_angle_channel(j)] for j in cfg.joints])
    if all(velocity_channel(j) in chans for j in cfg.joints):
        qd = np.column_stack([chans[velocity_channel(j)] for j in cfg.joints])
    else:
        qd = np.gradient(q, 1.0 / rec.sample_rate, axis=0) if n > 1 else np.zeros_like(q)
    have_ee = all(c in chans for k in cfg.end_effectors for c in ee_channels(k))
    have_act = len(muscles) == cfg.n_muscles and all(activation_channel(m) in chans for m in muscles)
    if have_act:
        act = np.column_stack([chans[activation_channel(m)] for m in muscles])
    out = {t: np.full(n, np.nan) for t in TERMS}
    order = list(TRACKED_JOINTS)
    idx = [order.index(j) for j in cfg.joints]
    ee_idx = [list(END_EFFECTORS).index(k) for k in cfg.end_effectors]
    for i in range(n):
        q_ref, qd_ref, ee_ref = ref.sample(phase[i])
        out["qpos"][i] = r_qpos(q[i], q_ref[idx], cfg)
        out["qvel"][i] = r_qvel(qd[i], qd_ref[idx], cfg)
        if have_ee:
            p = np.array([[chans[c][i] for c in ee_channels(k)] for k in cfg.end_effectors])
            out["ee"][i] = r_ee(p, ee_ref[ee_idx], cfg)
        if have_act:
            out["delta_a"][i] = r_delta_a(act[i], act[i - 1] if i else act[i], cfg)
    weights = {"qpos": cfg.w_qpos, "qvel": cfg.w_qvel, "ee": cfg.w_ee, "delta_a": cfg.w_delta_a}
    out["total"] = sum(weights[t] * np.nan_to_num(out[t]) for t in TERMS)
    return out


def reward_breakdown(series: dict[str, np.ndarray], cfg: RewardConfig | None = None) -> dict[str, dict]:
    """Per-term mean per step, episode sum and weighted contribution; NaN terms become None."""
    cfg = cfg or RewardConfig()
    weights = {"qpos": cfg.w_qpos, "qvel": cfg.w_qvel, "ee": cfg.w_ee, "delta_a": cfg.w_delta_a, "total": 1.0}
    report = {}
    for t in (*TERMS, "total"):
        v = series[t]
        if np.all(np.isnan(v)):
            report[t] = {"weight": weights[t], "mean": None, "sum": None, "weighted_sum": None}
            continue
        report[t] = {"weight": weights[t], "mean": float(np.mean(v)), "sum": float(np.sum(v)),
                     "weighted_sum": float(weights[t] * np.sum(v))}
    return report
