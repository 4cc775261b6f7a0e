"""Run a walker episode under fixed policies and emit a 30 Hz gait recording."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from ..recording import (END_EFFECTORS, EXO_CHANNEL, REF_PHASE_CHANNEL, REWARD_CHANNEL, TRACKED_JOINTS,
                         GaitRecording, ReferenceTrajectory, activation_channel, ee_channels,
                         velocity_channel)
from . import dynamics as dyn
from .env import EnvConfig, VecWalkerEnv
from .model import MUSCLES, WalkerModel
from .walker import ee_positions
from .reference import default_reference

__all__ = ["EXO_CHANNEL", "EpisodeConfig", "rollout_episode", "recording_fell"]


class HumanPolicy(Protocol):
    def reset(self, seed: int | None = None) -> None: ...
    def act(self, obs: np.ndarray) -> np.ndarray: ...


class ExoPolicy(Protocol):
    def reset(self, seed: int | None = None) -> None: ...
    def act(self, obs: np.ndarray) -> float: ...


@dataclass(frozen=True)
class EpisodeConfig:
    duration: float = 20.0
    seed: int = 0
    init_noise: float = 0.02
    init_speed: float = 1.25
    condition: str = ""


def _record_sample(chans: dict[str, list], q: np.ndarray, F: np.ndarray, bw: float) -> None:
    # F rows: heel_L, toe_L, heel_R, toe_R; columns (tangential, normal)
    for k, j in enumerate(("hip", "knee", "ankle")):
        chans[f"q_{j}_L"].append(q[3 + k])
        chans[f"q_{j}_R"].append(q[6 + k])
    chans["grf_L"].append(F[0, 1] + F[1, 1])
    chans["grf_R"].append(F[2, 1] + F[3, 1])
    chans["contact_heel_L"].append(F[0, 1] / bw)
    chans["contact_toe_L"].append(F[1, 1] / bw)
    chans["contact_heel_R"].append(F[2, 1] / bw)
    chans["contact_toe_R"].append(F[3, 1] / bw)


def _record_tracking(chans: dict[str, list], qd: np.ndarray, act: np.ndarray, ee: np.ndarray) -> None:
    for k, j in enumerate(TRACKED_JOINTS):
        chans[velocity_channel(j)].append(qd[3 + k])
    for k, m in enumerate(MUSCLES):
        chans[activation_channel(m)].append(act[k])
    for k, name in enumerate(END_EFFECTORS):
        cx, cz = ee_channels(name)
        chans[cx].append(ee[k, 0])
        chans[cz].append(ee[k, 1])


def rollout_episode(model: WalkerModel, human: HumanPolicy, exo: ExoPolicy | None = None,
                    cfg: EpisodeConfig | None = None, ref: ReferenceTrajectory | None = None,
                    on_step: Callable[[int, np.ndarray], None] | None = None) -> GaitRecording:
    """Simulate until a fall or ``cfg.duration`` and return the recording.

    Samples are taken after every control step. Contact channels are the heel
    and toe normal forces (averaged over the control period) over body weight;
    ``grf_*`` is their sum in newtons. With an exoskeleton attached the applied
    ankle torque is added as ``exo_torque_R``. Joint velocities, muscle
    activations, pelvis-relative heel/toe positions, the reference phase and
    the per-step reward are kept as optional channels so the reward can be
    replayed from the file.
    """
    cfg = cfg or EpisodeConfig()
    ref = ref or default_reference(model)
    env = VecWalkerEnv(model, ref, n_envs=1, seed=cfg.seed,
                       cfg=EnvConfig(max_time=cfg.duration, init_noise=cfg.init_noise,
                                     init_speed=cfg.init_speed))
    obs = env.reset()[0]
    human.reset(cfg.seed)
    if exo is not None:
        exo.reset(cfg.seed)
    bw = model.total_mass * model.gravity
    names = [f"q_{j}_{s}" for j in ("hip", "knee", "ankle") for s in "LR"]
    names += ["grf_L", "grf_R", "contact_heel_L", "contact_heel_R", "contact_toe_L", "contact_toe_R"]
    names += [velocity_channel(j) for j in TRACKED_JOINTS] + [activation_channel(m) for m in MUSCLES]
    names += [c for name in END_EFFECTORS for c in ee_channels(name)]
    names += [REF_PHASE_CHANNEL, REWARD_CHANNEL]
    chans: dict[str, list] = {n: [] for n in names}
    torque: list[float] = []
    fell = False
    for k in range(env.max_steps):
        u = np.asarray(human.act(obs), float)
        e = None
        if model.exo is not None:
            e = np.array([exo.act(obs) if exo is not None else 0.0])
        obs_all, rew, done, info = env.step(u[None], e)
        # finished envs are reset in place, so record the pre-reset state
        q = info["terminal_q"][0]
        _record_sample(chans, q, info["terminal_contact"][0], bw)
        P, _ = dyn.kinematics(env.packed, q)
        _record_tracking(chans, info["terminal_qd"][0], info["terminal_act"][0], ee_positions(P, q))
        chans[REF_PHASE_CHANNEL].append(info["ref_phase"][0])
        chans[REWARD_CHANNEL].append(rew[0])
        if model.exo is not None:
            torque.append(float(info["exo_torque"][0]))
        if on_step is not None:
            on_step(k, q)
        if done[0]:
            fell = bool(info["fell"][0])
            break
        obs = obs_all[0]
    channels = {n: np.array(v) for n, v in chans.items()}
    if model.exo is not None:
        channels[EXO_CHANNEL] = np.array(torque)
    meta = {"fell": str(fell).lower(), "seed": str(cfg.seed), "alpha_L": repr(model.alpha_L),
            "alpha_R": repr(model.alpha_R), "exo": str(model.exo is not None).lower(),
            "clamped_actions": str(env.clamp_count)}
    return GaitRecording(float(model.control_rate), channels, model.total_mass, model.gravity,
                         cfg.condition, meta)


def recording_fell(rec: GaitRecording) -> bool:
    return rec.meta.get("fell") == "true"

