import numpy as np
import pytest

from gaitlab.errors import AlphaOutOfRange, AlreadyAttached, InvalidConfig
from gaitlab.recording import EXO_CHANNEL
from gaitlab.sim import dynamics as dyn
from gaitlab.sim.env import VecWalkerEnv, initial_state
from gaitlab.sim.model import (
    EXO_MASS,
    MUSCLES,
    active_joint_torques,
    apply_weakness,
    attach_exoskeleton,
    build_walker,
    clamp_exo_command,
    exo_torque,
)
from gaitlab.sim.policies import (
    ConstantExoPolicy,
    PushOffExoPolicy,
    SineGaitController,
    ZeroPolicy,
    scripted_policy,
)
from gaitlab.sim.reference import default_reference
from gaitlab.sim.rollout import EpisodeConfig, recording_fell, rollout_episode
from gaitlab.sim.walker import OBS_SIZE, WalkerState, clamp_actions, obs_slices, physics_step

PLANTAR_R = MUSCLES.index("ankle_plantarflexor_R")


def test_activation_step():
    assert dyn.activation_step(0.0, 1.0, 0.01, 0.02) == 0.5
    assert dyn.activation_step(0.9, 1.0, 1.0, 0.02) == 1.0
    with pytest.raises(ValueError):
        dyn.activation_step(0.0, 1.0, 0.0, 0.02)


def test_free_fall_first_step():
    model = build_walker()
    st = WalkerState(np.r_[0.0, 2.0, np.zeros(7)], np.zeros(9), np.zeros(12))
    nxt = physics_step(st, model, np.zeros(12), contact=False)
    assert nxt.qd[1] == pytest.approx(-model.gravity / model.physics_rate, abs=1e-12)
    assert nxt.t == pytest.approx(1 / 1200)


def test_exo_map():
    assert exo_torque(-1.0) == -100.0
    assert exo_torque(0.0) == 0.0
    assert exo_torque(-0.25) == -25.0
    assert exo_torque(0.7) == 0.0
    assert clamp_exo_command(-1.5) == (-1.0, True)
    assert clamp_exo_command(-0.5) == (-0.5, False)


def test_clamp_actions_counts():
    h, e, n = clamp_actions(np.r_[np.full(11, 0.5), 1.5], 0.2)
    assert h[-1] == 1.0 and e == 0.0 and n == 2


def test_exo_attachment_mass():
    model = build_walker()
    exo = attach_exoskeleton(model)
    assert exo.total_mass - model.total_mass == pytest.approx(EXO_MASS, abs=1e-12)
    assert exo.segments["shank_R"].mass == pytest.approx(model.segments["shank_R"].mass + 1.165, abs=1e-15)
    with pytest.raises(AlreadyAttached):
        attach_exoskeleton(exo)


def test_weakness():
    model = build_walker()
    half = apply_weakness(model, 0.5)
    np.testing.assert_array_equal(half.effective_gains()[6:], 0.5 * model.effective_gains()[6:])
    np.testing.assert_array_equal(half.effective_gains()[:6], model.effective_gains()[:6])
    assert apply_weakness(half, 0.5).alpha_R == 0.25
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(AlphaOutOfRange):
            apply_weakness(model, bad)


def test_active_torque_halves():
    a = np.zeros(12)
    a[PLANTAR_R] = 1.0
    full = active_joint_torques(build_walker(), a)
    half = active_joint_torques(build_walker({"alpha_R": 0.5}), a)
    assert full[5] < 0
    np.testing.assert_array_equal(half, 0.5 * full)


def test_model_config_validation():
    with pytest.raises(InvalidConfig):
        build_walker({"bogus": 1})
    with pytest.raises(InvalidConfig):
        build_walker({"segments": {"thigh": {"mass": -1.0}}})
    assert build_walker({"segments": {"thigh": {"mass": 9.0}}}).segments["thigh_R"].mass == 9.0


def test_bundled_model_config_loads(data_dir):
    from gaitlab.sim.model import load_model_config

    build_walker(load_model_config(data_dir / "model.yaml"))


def test_env_observation_and_snapshot():
    model = build_walker()
    env = VecWalkerEnv(model, default_reference(model), n_envs=2, seed=5)
    obs = env.reset()
    assert obs.shape == (2, OBS_SIZE)
    snap = env.snapshot()
    act = np.full((2, 12), 0.2)
    a1 = [env.step(act)[0] for _ in range(5)]
    env.restore(snap)
    a2 = [env.step(act)[0] for _ in range(5)]
    for x, y in zip(a1, a2):
        np.testing.assert_array_equal(x, y)


def test_initial_state_on_ground():
    model = build_walker()
    st = initial_state(model, default_reference(model), 0.3)
    P, _ = dyn.kinematics(dyn.pack(model), st.q)
    assert P[list(dyn.CONTACT_POINTS), 1].min() == pytest.approx(0.0, abs=1e-12)


def test_scripted_policies():
    assert isinstance(scripted_policy("sine"), SineGaitController)
    assert isinstance(scripted_policy("zero"), ZeroPolicy)
    with pytest.raises(Exception):
        scripted_policy("moonwalk")


def test_rollout_channels_and_exo_profile():
    model = build_walker({"alpha_R": 0.5, "exo": True})
    rec = rollout_episode(model, SineGaitController(), ConstantExoPolicy(-0.4), EpisodeConfig(duration=1.0))
    assert rec.sample_rate == 30.0
    assert EXO_CHANNEL in rec.channels
    np.testing.assert_allclose(rec[EXO_CHANNEL], -40.0)
    assert rec.meta["exo"] == "true" and rec.meta["alpha_R"] == "0.5"


def test_zero_policy_falls():
    model = build_walker()
    rec = rollout_episode(model, ZeroPolicy(), cfg=EpisodeConfig(duration=5.0))
    assert recording_fell(rec) and rec.n_samples < 150


def test_scripted_gait_walks_at_full_strength():
    model = build_walker()
    rec = rollout_episode(model, SineGaitController(), cfg=EpisodeConfig(duration=8.0, seed=1))
    assert not recording_fell(rec) and rec.n_samples == 240


def test_push_off_exo_gating():
    sl = obs_slices()
    obs = np.zeros(OBS_SIZE)
    exo = PushOffExoPolicy(-0.2)
    obs[sl["contact"]] = (0.0, 0.0, 0.3, 0.4)
    obs[sl["ankle_rel_pelvis"]] = (0.1, -0.9, -0.15, -0.9)
    assert exo.act(obs) == -0.2
    obs[sl["ankle_rel_pelvis"]][2] = 0.15  # early stance, ankle ahead of the pelvis
    assert exo.act(obs) == 0.0
    obs[sl["ankle_rel_pelvis"]][2] = -0.15
    obs[sl["contact"]] = (0.5, 0.5, 0.0, 0.02)  # right swing
    assert exo.act(obs) == 0.0


def test_push_off_exo_keeps_walker_up():
    model = build_walker({"exo": True})
    rec = rollout_episode(model, SineGaitController(), PushOffExoPolicy(), EpisodeConfig(duration=8.0))
    assert not recording_fell(rec)
    assert rec[EXO_CHANNEL].min() == -10.0 and rec[EXO_CHANNEL].max() == 0.0
