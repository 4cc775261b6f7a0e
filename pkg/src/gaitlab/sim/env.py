"""Batched walker environment used for rollouts and training."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericalBlowup
from ..recording import ReferenceTrajectory
from ..reward import RewardConfig, reward_terms
from . import dynamics as dyn
from .model import EXO_RANGE, WalkerModel, exo_torque
from .walker import FALL_HEIGHT, FALL_PITCH, OBS_SIZE, WalkerState, observe, packed


@dataclass
class EnvConfig:
    max_time: float = 10.0  # s per episode before truncation
    init_speed: float = 1.25
    init_noise: float = 0.02  # SD of joint-angle perturbation at reset, rad
    init_phase: float = 0.3  # left mid-stance; also offsets the reference clock


def initial_state(model: WalkerModel, ref: ReferenceTrajectory, phase: float = 0.0,
                  speed: float = 1.25, rng: np.random.Generator | None = None,
                  noise: float = 0.0) -> WalkerState:
    """Pose from the reference at ``phase``, lowest contact point resting on the ground."""
    q_ref, qd_ref, _ = ref.sample(phase)
    q = np.zeros(dyn.NQ)
    qd = np.zeros(dyn.NQ)
    q[3:] = q_ref
    qd[3:] = qd_ref
    if rng is not None and noise > 0:
        q[3:] += rng.normal(0.0, noise, 6)
        qd[0] += rng.normal(0.0, noise)
    q[4] = max(q[4], 0.0)
    q[7] = max(q[7], 0.0)
    qd[0] += speed
    p = packed(model)
    P, _ = dyn.kinematics(p, q)
    q[1] = -P[list(dyn.CONTACT_POINTS), 1].min()
    return WalkerState(q, qd, np.zeros(12), t=phase * ref.cycle_period)


class VecWalkerEnv:
    """``n_envs`` independent walkers stepped together at the control rate.

    Episodes end on a fall (trunk COM below 0.6 m or |pitch| > 1 rad) or at
    ``max_time``; finished envs reset automatically on the next ``step``.
    """

    def __init__(self, model: WalkerModel, ref: ReferenceTrajectory, reward_cfg: RewardConfig | None = None,
                 n_envs: int = 1, seed: int = 0, cfg: EnvConfig | None = None):
        self.model = model
        self.ref = ref
        self.reward_cfg = reward_cfg or RewardConfig(dt=1.0 / model.control_rate)
        self.n = n_envs
        self.cfg = cfg or EnvConfig()
        self.packed = packed(model)
        self.bw = model.total_mass * model.gravity
        self.rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_envs)]
        self.max_steps = int(round(self.cfg.max_time * model.control_rate))
        self.clamp_count = 0
        self.Q = np.zeros((n_envs, dyn.NQ))
        self.QD = np.zeros((n_envs, dyn.NQ))
        self.A = np.zeros((n_envs, 12))
        self.U = np.zeros((n_envs, 12))
        self.EXO = np.zeros(n_envs)  # last exo command
        self.F = np.zeros((n_envs, 4, 2))
        self.t0 = self.cfg.init_phase * ref.cycle_period
        self.steps = np.zeros(n_envs, np.int64)
        self.ep_return = np.zeros(n_envs)
        self.obs = np.zeros((n_envs, OBS_SIZE))

    def _reset_env(self, e: int) -> None:
        st = initial_state(self.model, self.ref, self.cfg.init_phase, self.cfg.init_speed,
                           self.rngs[e], self.cfg.init_noise)
        self.Q[e], self.QD[e], self.A[e] = st.q, st.qd, st.a
        self.U[e] = 0.0
        self.EXO[e] = 0.0
        self.F[e] = 0.0
        self.steps[e] = 0
        self.ep_return[e] = 0.0
        self.obs[e] = self._observe(e)

    def state(self, e: int = 0) -> WalkerState:
        return WalkerState(self.Q[e].copy(), self.QD[e].copy(), self.A[e].copy(),
                           self.t0 + self.steps[e] / self.model.control_rate, self.F[e].copy(),
                           self.U[e].copy(), float(self.EXO[e]), int(self.steps[e]) * self.model.substeps)

    def _observe(self, e: int) -> np.ndarray:
        return observe(self.state(e), self.model, self.ref, rho=self.reward_cfg.rho)

    def snapshot(self) -> dict:
        """Complete mutable state, for bit-exact resumption."""
        arrays = {k: getattr(self, k).tolist() for k in ("Q", "QD", "A", "U", "EXO", "F", "steps", "ep_return", "obs")}
        return {**arrays, "clamp_count": self.clamp_count,
                "rngs": [r.bit_generator.state for r in self.rngs]}

    def restore(self, snap: dict) -> None:
        for k in ("Q", "QD", "A", "U", "EXO", "F", "ep_return", "obs"):
            setattr(self, k, np.array(snap[k], float))
        self.steps = np.array(snap["steps"], np.int64)
        self.clamp_count = int(snap["clamp_count"])
        for r, st in zip(self.rngs, snap["rngs"]):
            r.bit_generator.state = st

    def reset(self) -> np.ndarray:
        for e in range(self.n):
            self._reset_env(e)
        return self.obs.copy()

    def step(self, human_action, exo_action=None):
        """Returns ``(obs, reward, done, info)``; ``obs`` rows of finished envs are post-reset.

        ``info`` carries the pre-reset ``terminal_obs``, ``terminal_q``,
        ``terminal_qd``, ``terminal_act`` and ``terminal_contact`` of every env,
        the reference phase the reward was scored at and the applied ``exo_torque``.
        """
        h = np.asarray(human_action, float).reshape(self.n, 12)
        hc = np.clip(h, 0.0, 1.0)
        if exo_action is None:
            ec = np.zeros(self.n)
        else:
            ex = np.asarray(exo_action, float).reshape(self.n)
            ec = np.clip(ex, *EXO_RANGE)
            self.clamp_count += int(np.count_nonzero(ec != ex))
        self.clamp_count += int(np.count_nonzero(hc != h))
        tau = ec * self.model.exo.peak_torque if self.model.exo is not None else np.zeros(self.n)
        a_prev = self.A.copy()
        F, status = dyn.run(self.packed, self.Q, self.QD, self.A, hc.copy(), tau, self.model.substeps)
        bad = np.flatnonzero(status >= 0)
        if bad.size:
            e = int(bad[0])
            raise NumericalBlowup(int(self.steps[e]) * self.model.substeps + int(status[e]), env=e)
        self.F = F
        self.U = hc
        self.EXO = ec
        self.steps += 1
        rewards = np.zeros(self.n)
        done = np.zeros(self.n, bool)
        fell = np.zeros(self.n, bool)
        finished_returns, finished_lengths = [], []
        terminal_obs = np.zeros((self.n, OBS_SIZE))
        terminal_q = self.Q.copy()
        terminal_qd = self.QD.copy()
        terminal_act = self.A.copy()
        terminal_contact = self.F.copy()
        phase = np.array([self._phase(e) for e in range(self.n)])
        for e in range(self.n):
            rewards[e] = self._reward(e, a_prev[e])
            self.ep_return[e] += rewards[e]
            P, _ = dyn.kinematics(self.packed, self.Q[e])
            fell[e] = P[0, 1] < FALL_HEIGHT or abs(self.Q[e, 2]) > FALL_PITCH
            done[e] = fell[e] or self.steps[e] >= self.max_steps
            self.obs[e] = self._observe(e)
            terminal_obs[e] = self.obs[e]
            if done[e]:
                finished_returns.append(float(self.ep_return[e]))
                finished_lengths.append(int(self.steps[e]))
                self._reset_env(e)
        info = {"fell": fell, "episode_returns": finished_returns, "episode_lengths": finished_lengths,
                "terminal_obs": terminal_obs, "terminal_q": terminal_q, "terminal_qd": terminal_qd,
                "terminal_act": terminal_act, "terminal_contact": terminal_contact, "ref_phase": phase,
                "truncated": done & ~fell, "exo_torque": tau}
        return self.obs.copy(), rewards, done, info

    def _phase(self, e: int) -> float:
        t = self.t0 + self.steps[e] / self.model.control_rate
        return (t / self.ref.cycle_period) % 1.0

    def _reward(self, e: int, a_prev: np.ndarray) -> float:
        phi = self._phase(e)
        q_ref, qd_ref, ee_ref = self.ref.sample(phi)
        P, _ = dyn.kinematics(self.packed, self.Q[e])
        ee = P[7:11] - self.Q[e, :2]
        return reward_terms(self.Q[e, 3:], q_ref, self.QD[e, 3:], qd_ref, ee, ee_ref,
                            self.A[e], a_prev, self.reward_cfg).total
