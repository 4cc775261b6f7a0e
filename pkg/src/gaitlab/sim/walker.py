"""Walker state, observation layout, control-rate stepping and episode rollout."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from ..errors import NumericalBlowup
from ..recording import END_EFFECTORS, GaitRecording, ReferenceTrajectory
from ..reward import RewardConfig, reward_terms
from . import dynamics as dyn
from .model import EXO_RANGE, WalkerModel, exo_torque

OBS_VERSION = 1
OBS_SIZE = 65
# name, length; order is part of the external contract
OBS_LAYOUT = (
    ("trunk", 6),            # height, sin(pitch), cos(pitch), vx, vz, pitch rate
    ("joint_angles", 6),     # hip/knee/ankle L then R
    ("joint_velocities", 6),
    ("activations", 12),     # MUSCLES order
    ("contact", 4),          # heel_L, toe_L, heel_R, toe_R normal force / body weight
    ("prev_human_action", 12),
    ("prev_exo_command", 1),
    ("phase", 2),            # sin, cos of the reference clock
    ("ref_pos_error", 6),    # q - q_ref
    ("ref_vel_error", 6),    # qdot - rho * qdot_ref
    ("ankle_rel_pelvis", 4),  # (x, z) left ankle, right ankle
)
assert sum(n for _, n in OBS_LAYOUT) == OBS_SIZE


def obs_slices() -> dict[str, slice]:
    out, i = {}, 0
    for name, n in OBS_LAYOUT:
        out[name] = slice(i, i + n)
        i += n
    return out


FALL_HEIGHT = 0.6  # trunk COM height, m
FALL_PITCH = 1.0  # rad


@dataclass
class WalkerState:
    q: np.ndarray
    qd: np.ndarray
    a: np.ndarray
    t: float = 0.0
    contact: np.ndarray = field(default_factory=lambda: np.zeros((4, 2)))  # (tangential, normal)
    u: np.ndarray = field(default_factory=lambda: np.zeros(12))  # last applied excitations
    exo_cmd: float = 0.0
    step: int = 0

    def copy(self) -> WalkerState:
        return WalkerState(self.q.copy(), self.qd.copy(), self.a.copy(), self.t, self.contact.copy(),
                           self.u.copy(), self.exo_cmd, self.step)


_PACK_CACHE: dict[tuple[int, tuple], tuple[WalkerModel, dyn.Packed]] = {}


def packed(model: WalkerModel, **opts) -> dyn.Packed:
    key = (id(model), tuple(sorted(opts.items())))
    hit = _PACK_CACHE.get(key)
    if hit is not None and hit[0] is model:
        return hit[1]
    if len(_PACK_CACHE) > 64:
        _PACK_CACHE.clear()
    p = dyn.pack(model, **opts)
    _PACK_CACHE[key] = (model, p)
    return p


def clamp_actions(human_action, exo_action) -> tuple[np.ndarray, float, int]:
    """Clamp to [0, 1]^12 and [-1, 0]; returns the number of clamped entries."""
    h = np.asarray(human_action, float).reshape(12)
    hc = np.clip(h, 0.0, 1.0)
    e = float(exo_action) if exo_action is not None else 0.0
    ec = min(EXO_RANGE[1], max(EXO_RANGE[0], e))
    return hc, ec, int(np.count_nonzero(hc != h)) + int(ec != e)


def physics_step(state: WalkerState, model: WalkerModel, muscle_u, exo_cmd: float = 0.0,
                 dt: float | None = None, **pack_opts) -> WalkerState:
    """Advance one physics step (default 1/1200 s)."""
    return _advance(state, model, muscle_u, exo_cmd, 1, dt, **pack_opts)


def _advance(state, model, muscle_u, exo_cmd, n_sub, dt=None, **pack_opts) -> WalkerState:
    if dt is not None:
        pack_opts["dt"] = dt
    p = packed(model, **pack_opts)
    u, cmd, _ = clamp_actions(muscle_u, exo_cmd)
    tau = exo_torque(cmd, model.exo.peak_torque) if model.exo is not None else 0.0
    Q = state.q.reshape(1, -1).copy()
    QD = state.qd.reshape(1, -1).copy()
    A = state.a.reshape(1, -1).copy()
    F, status = dyn.run(p, Q, QD, A, u.reshape(1, -1).copy(), np.array([tau]), n_sub)
    if status[0] >= 0:
        raise NumericalBlowup(state.step + int(status[0]))
    step_dt = p.scalars[dyn.DT]
    return WalkerState(Q[0], QD[0], A[0], state.t + n_sub * step_dt, F[0], u, cmd, state.step + n_sub)


def control_step(state: WalkerState, model: WalkerModel, human_action, exo_action=0.0,
                 ref: ReferenceTrajectory | None = None, rho: float = 1.0,
                 **pack_opts) -> tuple[WalkerState, np.ndarray]:
    """Hold controls for one control period (physics_rate / control_rate substeps)."""
    nxt = _advance(state, model, human_action, exo_action, model.substeps, **pack_opts)
    return nxt, observe(nxt, model, ref, rho=rho)


def is_fallen(state: WalkerState, model: WalkerModel) -> bool:
    p = packed(model)
    P, _ = dyn.kinematics(p, state.q)
    return bool(P[0, 1] < FALL_HEIGHT or abs(state.q[2]) > FALL_PITCH)


def ee_positions(P: np.ndarray, q: np.ndarray) -> np.ndarray:
    """(4, 2) pelvis-relative heel/toe positions in END_EFFECTORS order."""
    idx = [dyn.POINTS.index(k) for k in END_EFFECTORS]
    return P[idx] - q[:2]


def observe(state: WalkerState, model: WalkerModel, ref: ReferenceTrajectory | None = None,
            rho: float = 1.0, prev_actions=None) -> np.ndarray:
    """65-D observation; see ``OBS_LAYOUT``."""
    p = packed(model)
    q, qd = state.q, state.qd
    P, _ = dyn.kinematics(p, q)
    bw = model.total_mass * model.gravity
    pitch = q[2]
    if prev_actions is None:
        u, e = state.u, state.exo_cmd
    else:
        u, e = prev_actions
    if ref is not None:
        phi = (state.t / ref.cycle_period) % 1.0
        q_ref, qd_ref = ref.joints_at(phi)
        pos_err = q[3:] - q_ref
        vel_err = qd[3:] - rho * qd_ref
    else:
        phi = 0.0
        pos_err = np.zeros(6)
        vel_err = np.zeros(6)
    pelvis = q[:2]
    obs = np.concatenate([
        [P[0, 1], np.sin(pitch), np.cos(pitch), qd[0], qd[1], qd[2]],
        q[3:], qd[3:], state.a,
        state.contact[:, 1] / bw,
        np.asarray(u, float), [float(e)],
        [np.sin(2 * np.pi * phi), np.cos(2 * np.pi * phi)],
        pos_err, vel_err,
        P[11] - pelvis, P[12] - pelvis,
    ])
    return obs
