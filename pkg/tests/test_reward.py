import math

import numpy as np
import pytest

from gaitlab.errors import GaitLabError, LengthMismatch, MissingEndEffector, MissingJoint
from gaitlab.recording import END_EFFECTORS, TRACKED_JOINTS
from gaitlab.reward import (
    TERMS,
    RewardConfig,
    r_delta_a,
    r_ee,
    r_qpos,
    r_qvel,
    reward_breakdown,
    reward_series,
    reward_terms,
    total_reward,
)

ONE = RewardConfig(dt=1.0, joints=("knee_L",), joint_weights={"knee_L": 1.0}, n_muscles=1)


def _perfect():
    q = np.linspace(-0.2, 0.4, 6)
    qd = np.linspace(1.0, -1.0, 6)
    p = np.arange(8.0).reshape(4, 2) / 10
    a = np.full(12, 0.3)
    return q, q, qd, qd, p, p, a, a


def test_perfect_tracking_bounds():
    cfg = RewardConfig(w_qpos=1, w_qvel=1, w_ee=1, w_delta_a=1)
    q, qr, qd, qdr, p, pr, a, ap = _perfect()
    assert r_qpos(q, qr, cfg) == pytest.approx(0.2, abs=1e-15)
    assert r_qvel(qd, qdr, cfg) == pytest.approx(0.2, abs=1e-15)
    assert r_ee(p, pr, cfg) == pytest.approx(1 / 30, abs=1e-15)
    assert r_delta_a(a, ap, cfg) == pytest.approx(1 / 30, abs=1e-15)
    total = total_reward(q, qr, qd, qdr, p, pr, a, ap, cfg)
    assert total == pytest.approx(0.2 + 0.2 + 1 / 30 + 1 / 30, abs=1e-12)
    assert total == pytest.approx(cfg.upper_bound(), abs=1e-12)


def test_hand_evaluated_kernels():
    assert r_qpos([0.5], [0.0], ONE) == pytest.approx(math.exp(-2.0), abs=1e-12)
    assert r_qvel([1.0], [0.0], ONE) == pytest.approx(math.exp(-8.0), abs=1e-12)
    cfg = RewardConfig(dt=1.0)
    p = np.zeros((4, 2))
    q = p.copy()
    q[2] = (0.3, 0.4)
    assert r_ee(q, p, cfg) == pytest.approx((3 + math.exp(-1.25)) / 4, abs=1e-12)
    assert r_delta_a([1.0], [0.0], ONE) == pytest.approx(math.exp(-4.0), abs=1e-12)


def test_rho_scales_velocity_target():
    cfg2 = RewardConfig(dt=1.0, joints=("knee_L",), joint_weights={"knee_L": 1.0}, rho=2.0)
    assert r_qvel([2.0], [1.0], cfg2) == pytest.approx(1.0)
    assert r_qvel([1.0], [1.0], cfg2) < r_qvel([1.0], [1.0], ONE)


def test_kernels_even_and_positive(rng):
    for e in rng.normal(size=20):
        assert r_qpos([e], [0.0], ONE) == r_qpos([-e], [0.0], ONE) > 0


def test_total_linear_in_weights():
    args = (np.zeros(6), np.full(6, 0.1), np.zeros(6), np.full(6, 0.3), np.zeros((4, 2)), np.full((4, 2), 0.1),
            np.zeros(12), np.full(12, 0.2))
    base = reward_terms(*args, RewardConfig())
    cfg = RewardConfig(w_qpos=2.0, w_qvel=0.0, w_ee=3.0, w_delta_a=0.5)
    want = 2.0 * base.qpos + 3.0 * base.ee + 0.5 * base.delta_a
    assert total_reward(*args, cfg) == pytest.approx(want, abs=1e-15)


# analytic d/de of dt*exp(-k e^2) is dt * (-2 k e) * exp(-k e^2)
@pytest.mark.parametrize("e", [0.01, 0.1, 1.0])
@pytest.mark.parametrize("term,k", [("qpos", 8.0), ("qvel", 8.0), ("ee", 5.0), ("delta_a", 4.0)])
def test_finite_difference_gradient(term, k, e):
    cfg = RewardConfig(joints=("knee_L",), joint_weights={"knee_L": 1.0}, n_muscles=1,
                       end_effectors=("toe_R",))
    f = {
        "qpos": lambda x: r_qpos([x], [0.0], cfg),
        "qvel": lambda x: r_qvel([x], [0.0], cfg),
        "ee": lambda x: r_ee({"toe_R": [x, 0.0]}, {"toe_R": [0.0, 0.0]}, cfg),
        "delta_a": lambda x: r_delta_a([x], [0.0], cfg),
    }[term]
    h = 1e-6
    numeric = (f(e + h) - f(e - h)) / (2 * h)
    analytic = cfg.dt * (-2 * k * e) * math.exp(-k * e * e)
    assert numeric == pytest.approx(analytic, rel=1e-6)


def test_contract_errors():
    cfg = RewardConfig()
    with pytest.raises(MissingJoint):
        r_qpos({"hip_L": 0.0}, {"hip_L": 0.0}, cfg)
    with pytest.raises(LengthMismatch):
        r_qpos(np.zeros(5), np.zeros(5), cfg)
    with pytest.raises(MissingEndEffector):
        r_ee({"toe_R": [0, 0]}, {"toe_R": [0, 0]}, cfg)
    with pytest.raises(LengthMismatch):
        r_delta_a(np.zeros(11), np.zeros(11), cfg)


@pytest.mark.parametrize("kw", [dict(w_qpos=-1.0), dict(w_qpos=0, w_qvel=0, w_ee=0, w_delta_a=0),
                                dict(dt=0.0), dict(rho=-1.0)])
def test_config_invariants(kw):
    with pytest.raises(GaitLabError):
        RewardConfig(**kw)


def test_config_from_dict_fills_joint_weights():
    cfg = RewardConfig.from_dict({"joint_weights": {"ankle_R": 2.0}, "w_qvel": 0.0})
    assert cfg.joint_weights["ankle_R"] == 2.0 and cfg.joint_weights["hip_L"] == 1.0
    assert cfg.joints == TRACKED_JOINTS and cfg.end_effectors == END_EFFECTORS


def test_replay_matches_simulated_reward():
    from gaitlab.sim.model import build_walker
    from gaitlab.sim.policies import SineGaitController
    from gaitlab.sim.reference import default_reference
    from gaitlab.sim.rollout import EpisodeConfig, rollout_episode

    model = build_walker()
    ref = default_reference(model)
    rec = rollout_episode(model, SineGaitController(), cfg=EpisodeConfig(duration=2.0, seed=3), ref=ref)
    series = reward_series(rec, ref)
    # the first sample has no previous activation in the file; compare from the second on
    np.testing.assert_allclose(series["total"][1:], rec["reward"][1:], rtol=0, atol=1e-12)
    summary = reward_breakdown(series)
    assert list(summary) == [*TERMS, "total"]
    assert summary["qpos"]["weighted_sum"] == pytest.approx(summary["qpos"]["sum"])
