"""Scripted walker controllers (fixtures for rollouts, evaluation and tests)."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .model import MuscleGains
from .walker import obs_slices

_S = obs_slices()


def torques_to_excitations(tau: np.ndarray, gains: MuscleGains | None = None) -> np.ndarray:
    """Split desired joint torques (hip, knee, ankle per side) onto antagonist pairs.

    Uses baseline (unweakened) gains: a weakened side then falls short of the
    requested torque, as a strength deficit should.
    """
    g = gains or MuscleGains()
    pos = np.array([g.hip_flexor, g.knee_flexor, g.ankle_dorsiflexor] * 2)
    neg = np.array([g.hip_extensor, g.knee_extensor, g.ankle_plantarflexor] * 2)
    tau = np.asarray(tau, float)
    u = np.zeros(12)
    u[0::2] = np.clip(tau / pos, 0.0, 1.0)
    u[1::2] = np.clip(-tau / neg, 0.0, 1.0)
    return u


class ZeroPolicy:
    name = "zero"

    def reset(self, seed: int | None = None) -> None:
        pass

    def act(self, obs: np.ndarray) -> np.ndarray:
        return np.zeros(12)


@dataclass(frozen=True)
class SineGaitParams:
    lift_time: float = 0.275  # swing lift phase before the placement phase, s
    step_time: float = 0.3095  # period of the half-sine knee profile, s
    swing_thigh: float = 0.6663  # absolute thigh target during lift, rad
    place_thigh: float = 0.2708  # absolute thigh target during placement, rad
    c_d: float = 0.2238  # placement gain on pelvis-ahead-of-stance-ankle distance
    c_v: float = 0.3869  # lift-phase gain on forward speed
    knee_lift: float = 1.2982
    swing_ankle: float = 0.3754
    stance_knee: float = 0.2314
    stance_ankle: float = 0.1016
    push_off: float = -0.1479
    trunk_pitch: float = -0.0152
    kp_hip: float = 386.5907
    kd_hip: float = 30.1124
    kp_trunk: float = 678.8789
    kd_trunk: float = 81.7589
    kp_knee: float = 228.8613  # stance
    kd_knee: float = 27.2757
    kp_swing_knee: float = 20.8552  # light distal segments need soft gains at 30 Hz
    kd_swing_knee: float = 1.0651
    kp_ankle: float = 213.7874
    kd_ankle: float = 2.0384
    kp_swing_ankle: float = 12.9924
    kd_swing_ankle: float = 0.6374
    contact_on: float = 0.1  # body-weight fraction that counts as foot contact


class SineGaitController:
    """Stepping controller: half-sine swing knee profile plus balance feedback.

    Each step has a timed lift phase followed by a placement phase that ends
    when the swing foot lands ahead of the stance foot. Swing-thigh placement
    shifts with the pelvis offset over the stance ankle; the stance hip holds
    the trunk upright.
    """

    name = "scripted:sine"

    def __init__(self, params: SineGaitParams | None = None, gains: MuscleGains | None = None):
        self.p = params or SineGaitParams()
        self.gains = gains or MuscleGains()
        self.reset()

    def reset(self, seed: int | None = None) -> None:
        self.stance = None  # 0 left, 1 right; picked from the first observation
        self.t_state = 0.0

    def act(self, obs: np.ndarray, dt: float = 1.0 / 30.0) -> np.ndarray:
        p = self.p
        trunk = obs[_S["trunk"]]
        pitch = math.atan2(trunk[1], trunk[2])
        vx, pitch_rate = trunk[3], trunk[5]
        q = obs[_S["joint_angles"]]
        qd = obs[_S["joint_velocities"]]
        contact = obs[_S["contact"]]
        ankles = obs[_S["ankle_rel_pelvis"]].reshape(2, 2)

        if self.stance is None:
            self.stance = int(ankles[1, 1] < ankles[0, 1])
            self.t_state = p.lift_time
        self.t_state += dt
        sw = 1 - self.stance
        swing_load = contact[2 * sw] + contact[2 * sw + 1]
        ahead = ankles[sw, 0] > ankles[self.stance, 0]
        if self.t_state > p.lift_time and ahead and swing_load > p.contact_on:
            self.stance, sw = sw, self.stance
            self.t_state = 0.0
        st = self.stance
        s = min(self.t_state / p.step_time, 1.0)
        lifting = self.t_state < p.lift_time

        d = -ankles[st, 0]  # pelvis ahead of stance ankle
        if lifting:
            thigh_target = p.swing_thigh + p.c_v * (vx - 1.25)
        else:
            thigh_target = p.place_thigh + p.c_d * d
        hs, ks, as_ = 3 * sw, 3 * sw + 1, 3 * sw + 2
        ht, kt, at = 3 * st, 3 * st + 1, 3 * st + 2

        tau = np.zeros(6)
        tau[hs] = p.kp_hip * (thigh_target - pitch - q[hs]) - p.kd_hip * qd[hs]
        tau[ks] = p.kp_swing_knee * (p.knee_lift * math.sin(math.pi * s) - q[ks]) - p.kd_swing_knee * qd[ks]
        tau[as_] = p.kp_swing_ankle * (p.swing_ankle - q[as_]) - p.kd_swing_ankle * qd[as_]
        tau[ht] = p.kp_trunk * (pitch - p.trunk_pitch) + p.kd_trunk * pitch_rate - tau[hs]
        tau[kt] = p.kp_knee * (p.stance_knee - q[kt]) - p.kd_knee * qd[kt]
        ankle_target = p.stance_ankle if lifting else p.push_off
        tau[at] = p.kp_ankle * (ankle_target - q[at]) - p.kd_ankle * qd[at]
        return torques_to_excitations(tau, self.gains)


class ConstantExoPolicy:
    """Fixed plantarflexion command; a scripted stand-in for a learned exo actor."""

    name = "exo:constant"

    def __init__(self, command: float = -0.3):
        self.command = float(command)

    def reset(self, seed: int | None = None) -> None:
        pass

    def act(self, obs: np.ndarray) -> float:
        return self.command


class PushOffExoPolicy:
    """Plantarflexion assist only in late right stance (foot loaded, behind the pelvis).

    A constant command also pushes during swing and early stance, which trips
    the scripted walker within a second.
    """

    name = "exo:push-off"

    def __init__(self, command: float = -0.1, contact_on: float = 0.1):
        self.command = float(command)
        self.contact_on = contact_on

    def reset(self, seed: int | None = None) -> None:
        pass

    def act(self, obs: np.ndarray) -> float:
        load = obs[_S["contact"]][2:4].sum()
        behind = obs[_S["ankle_rel_pelvis"]][2] < 0.0
        return self.command if load > self.contact_on and behind else 0.0


SCRIPTED = {"zero": ZeroPolicy, "sine": SineGaitController}


def scripted_policy(name: str):
    key = name.split(":", 1)[1] if name.startswith("scripted:") else name
    try:
        return SCRIPTED[key]()
    except KeyError:
        raise ValueError(f"unknown scripted policy {name!r}; choose from {sorted(SCRIPTED)}") from None
