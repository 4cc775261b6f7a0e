"""Default imitation reference: periodic sagittal joint curves plus foot/toe paths."""

from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicSpline

from ..recording import END_EFFECTORS, TRACKED_JOINTS, ReferenceTrajectory, phase_derivative
from . import dynamics as dyn
from .model import WalkerModel, build_walker

CYCLE_PERIOD = 1.1  # s, at the nominal 1.25 m/s
NOMINAL_SPEED = 1.25

# (percent of cycle, degrees) from heel strike of the same leg
_KEYPOINTS = {
    "hip": [(0, 25), (15, 20), (40, 0), (55, -10), (65, -2), (85, 28), (100, 25)],
    "knee": [(0, 3), (15, 18), (40, 5), (60, 38), (73, 62), (90, 20), (100, 3)],
    "ankle": [(0, 0), (8, -6), (45, 10), (62, -18), (75, -5), (90, 2), (100, 0)],
}


def joint_curve(joint: str, phase: np.ndarray) -> np.ndarray:
    pts = np.array(_KEYPOINTS[joint], float)
    spline = CubicSpline(pts[:, 0] / 100.0, np.radians(pts[:, 1]), bc_type="periodic")
    return spline(np.mod(phase, 1.0))


def default_reference(model: WalkerModel | None = None, n: int = 101,
                      cycle_period: float = CYCLE_PERIOD) -> ReferenceTrajectory:
    """Left leg follows the keypoint curves; the right leg lags by half a cycle."""
    model = model or build_walker()
    phase = np.linspace(0.0, 1.0, n)
    q_ref, qdot_ref = {}, {}
    for j in TRACKED_JOINTS:
        joint, side = j.split("_")
        shift = 0.0 if side == "L" else 0.5
        q_ref[j] = joint_curve(joint, phase - shift)
        qdot_ref[j] = phase_derivative(q_ref[j], phase, cycle_period)
    p = dyn.pack(model)
    ee = {k: np.zeros((n, 2)) for k in END_EFFECTORS}
    for i in range(n):
        q = np.zeros(dyn.NQ)
        q[3:] = [q_ref[j][i] for j in TRACKED_JOINTS]
        P, _ = dyn.kinematics(p, q)
        for k in END_EFFECTORS:
            ee[k][i] = P[dyn.POINTS.index(k)]
    return ReferenceTrajectory(phase, q_ref, qdot_ref, ee, cycle_period)
