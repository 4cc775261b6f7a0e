"""Compiled planar multibody dynamics: kinematics, contact, activation, semi-implicit Euler.

Every body/point position is ``base + sum_k c_k * e(phi_b + beta_k)`` with
``e(psi) = (sin psi, -cos psi)`` and absolute angles ``phi = S q``. The mass
matrix and bias forces follow by projecting Newton-Euler onto the point
Jacobians, which is exact for this tree.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from numba import njit

from .model import MUSCLE_JOINT, MUSCLE_SIGN, SEGMENTS, WalkerModel

NQ = 9
NB = 7
NPOINT = 13
POINTS = SEGMENTS + ("heel_L", "toe_L", "heel_R", "toe_R", "ankle_L", "ankle_R")
CONTACT_POINTS = (7, 8, 9, 10)

# scalar parameter slots
G, KN, CN, CT, MU, KLIM, DLIM, CONTACT_ON, DT = range(9)


class Packed(NamedTuple):
    mass: np.ndarray
    inertia: np.ndarray
    S: np.ndarray
    pt_n: np.ndarray
    pt_body: np.ndarray
    pt_c: np.ndarray
    pt_beta: np.ndarray
    m_joint: np.ndarray
    m_sign: np.ndarray
    m_gain: np.ndarray
    jk: np.ndarray
    jd: np.ndarray
    jlo: np.ndarray
    jhi: np.ndarray
    scalars: np.ndarray
    tau_act: float


def angle_map() -> np.ndarray:
    S = np.zeros((NB, NQ))
    S[:, 2] = 1.0
    for side, (th, sh, ft, hip) in enumerate(((1, 2, 3, 3), (4, 5, 6, 6))):
        for b in (th, sh, ft):
            S[b, hip] = 1.0
        S[sh, hip + 1] = -1.0  # knee flexion swings the shank backwards
        S[ft, hip + 1] = -1.0
        S[ft, hip + 2] = 1.0  # dorsiflexion lifts the toes
    return S


def pack(model: WalkerModel, *, gravity: bool = True, contact: bool = True,
         damping: bool = True, dt: float | None = None) -> Packed:
    seg = [model.segments[n] for n in SEGMENTS]
    mass = np.array([s.mass for s in seg], float)
    inertia = np.array([s.inertia for s in seg], float)
    ft = model.foot
    pt_n = np.zeros(NPOINT, np.int64)
    pt_body = np.zeros((NPOINT, 4), np.int64)
    pt_c = np.zeros((NPOINT, 4))
    pt_beta = np.zeros((NPOINT, 4))

    def put(p, terms):
        pt_n[p] = len(terms)
        for k, (b, c, beta) in enumerate(terms):
            pt_body[p, k], pt_c[p, k], pt_beta[p, k] = b, c, beta

    half_pi = 0.5 * math.pi
    put(0, [(0, seg[0].com, math.pi)])
    for side, (th, sh, fo) in enumerate(((1, 2, 3), (4, 5, 6))):
        Lt, Ls = seg[th].length, seg[sh].length
        leg = [(th, Lt, 0.0), (sh, Ls, 0.0)]
        put(th, [(th, seg[th].com, 0.0)])
        put(sh, [(th, Lt, 0.0), (sh, seg[sh].com, 0.0)])
        put(fo, leg + [(fo, ft.com_forward, half_pi), (fo, 0.5 * ft.height, 0.0)])
        put(7 + 2 * side, leg + [(fo, ft.heel, half_pi), (fo, ft.height, 0.0)])
        put(8 + 2 * side, leg + [(fo, ft.toe, half_pi), (fo, ft.height, 0.0)])
        put(11 + side, leg)

    jp = [model.joints[n] for n in ("hip", "knee", "ankle")] * 2
    jk = np.array([j.stiffness for j in jp], float)
    jd = np.array([j.damping for j in jp], float) if damping else np.zeros(6)
    c = model.contact
    scalars = np.array([
        model.gravity if gravity else 0.0,
        c.k_n, c.c_n if damping else 0.0, c.c_t if damping else 0.0, c.mu,
        model.limit_stiffness, model.limit_damping if damping else 0.0,
        1.0 if contact else 0.0,
        dt if dt is not None else 1.0 / model.physics_rate,
    ])
    return Packed(mass, inertia, angle_map(), pt_n, pt_body, pt_c, pt_beta,
                  MUSCLE_JOINT.copy(), MUSCLE_SIGN.copy(), model.effective_gains(),
                  jk, jd, np.array([j.lower for j in jp]), np.array([j.upper for j in jp]),
                  scalars, float(model.activation_tau))


@njit(cache=True)
def _angles(S, q, qd, phi, phid):
    for b in range(NB):
        a = 0.0
        w = 0.0
        for j in range(2, NQ):
            a += S[b, j] * q[j]
            w += S[b, j] * qd[j]
        phi[b] = a
        phid[b] = w


@njit(cache=True)
def _point(p, q, phi, phid, S, pt_n, pt_body, pt_c, pt_beta, pos, J, bias):
    pos[0] = q[0]
    pos[1] = q[1]
    for r in range(2):
        bias[r] = 0.0
        for j in range(NQ):
            J[r, j] = 0.0
    J[0, 0] = 1.0
    J[1, 1] = 1.0
    for k in range(pt_n[p]):
        b = pt_body[p, k]
        c = pt_c[p, k]
        psi = phi[b] + pt_beta[p, k]
        s = math.sin(psi)
        co = math.cos(psi)
        pos[0] += c * s
        pos[1] -= c * co
        for j in range(2, NQ):
            sb = S[b, j]
            if sb != 0.0:
                J[0, j] += c * co * sb
                J[1, j] += c * s * sb
        w2 = phid[b] * phid[b]
        bias[0] -= c * s * w2
        bias[1] += c * co * w2


@njit(cache=True)
def _cholesky_solve(M, rhs, out):
    n = M.shape[0]
    L = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1):
            s = M[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            if i == j:
                if s <= 0.0:
                    return False
                L[i, i] = math.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    y = np.zeros(n)
    for i in range(n):
        s = rhs[i]
        for k in range(i):
            s -= L[i, k] * y[k]
        y[i] = s / L[i, i]
    for i in range(n - 1, -1, -1):
        s = y[i]
        for k in range(i + 1, n):
            s -= L[k, i] * out[k]
        out[i] = s / L[i, i]
    return True


@njit(cache=True)
def _contact_force(z, vx, vz, kn, cn, ct, mu):
    if z >= 0.0:
        return 0.0, 0.0
    n = -kn * z - cn * vz
    if n < 0.0:
        n = 0.0
    t = -ct * vx
    lim = mu * n
    if t > lim:
        t = lim
    elif t < -lim:
        t = -lim
    return t, n


@njit(cache=True)
def _step(q, qd, act, u, exo_tau, mass, inertia, S, pt_n, pt_body, pt_c, pt_beta,
          m_joint, m_sign, m_gain, jk, jd, jlo, jhi, sc, tau_act, forces):
    """One physics step in place. ``forces`` (4, 2) receives contact (t, n). Returns ok flag."""
    dt = sc[DT]
    g = sc[G]
    phi = np.empty(NB)
    phid = np.empty(NB)
    _angles(S, q, qd, phi, phid)
    M = np.zeros((NQ, NQ))
    rhs = np.zeros(NQ)
    pos = np.empty(2)
    J = np.empty((2, NQ))
    bias = np.empty(2)
    for b in range(NB):
        _point(b, q, phi, phid, S, pt_n, pt_body, pt_c, pt_beta, pos, J, bias)
        m = mass[b]
        for i in range(NQ):
            ji0 = J[0, i]
            ji1 = J[1, i]
            rhs[i] += m * (ji1 * (-g) - ji0 * bias[0] - ji1 * bias[1])
            for j in range(NQ):
                M[i, j] += m * (ji0 * J[0, j] + ji1 * J[1, j]) + inertia[b] * S[b, i] * S[b, j]
    for c in range(4):
        forces[c, 0] = 0.0
        forces[c, 1] = 0.0
    if sc[CONTACT_ON] != 0.0:
        for c in range(4):
            _point(7 + c, q, phi, phid, S, pt_n, pt_body, pt_c, pt_beta, pos, J, bias)
            if pos[1] < 0.0:
                vx = 0.0
                vz = 0.0
                for j in range(NQ):
                    vx += J[0, j] * qd[j]
                    vz += J[1, j] * qd[j]
                t, n = _contact_force(pos[1], vx, vz, sc[KN], sc[CN], sc[CT], sc[MU])
                forces[c, 0] = t
                forces[c, 1] = n
                for j in range(NQ):
                    rhs[j] += J[0, j] * t + J[1, j] * n
    # activation dynamics, then muscle torques from the advanced activations
    r = dt / tau_act
    for m in range(act.shape[0]):
        a = act[m] + r * (u[m] - act[m])
        if a < 0.0:
            a = 0.0
        elif a > 1.0:
            a = 1.0
        act[m] = a
        rhs[m_joint[m]] += m_sign[m] * m_gain[m] * a
    for i in range(6):
        j = 3 + i
        tau = -jk[i] * q[j] - jd[i] * qd[j]
        if q[j] < jlo[i]:
            tau += sc[KLIM] * (jlo[i] - q[j]) - sc[DLIM] * qd[j]
        elif q[j] > jhi[i]:
            tau += sc[KLIM] * (jhi[i] - q[j]) - sc[DLIM] * qd[j]
        rhs[j] += tau
    rhs[8] += exo_tau
    qdd = np.zeros(NQ)
    if not _cholesky_solve(M, rhs, qdd):
        return False
    ok = True
    for j in range(NQ):
        qd[j] += dt * qdd[j]
        q[j] += dt * qd[j]
        if not (math.isfinite(q[j]) and math.isfinite(qd[j])):
            ok = False
    return ok


@njit(cache=True)
def simulate_batch(Q, QD, A, U, EXO, n_sub, mass, inertia, S, pt_n, pt_body, pt_c, pt_beta,
                   m_joint, m_sign, m_gain, jk, jd, jlo, jhi, sc, tau_act, F_mean, status):
    """Advance each env ``n_sub`` steps under held controls.

    ``F_mean`` (E, 4, 2) gets the interval-mean contact forces; ``status[e]``
    is -1 on success or the failing substep index.
    """
    forces = np.zeros((4, 2))
    for e in range(Q.shape[0]):
        status[e] = -1
        for c in range(4):
            F_mean[e, c, 0] = 0.0
            F_mean[e, c, 1] = 0.0
        for k in range(n_sub):
            ok = _step(Q[e], QD[e], A[e], U[e], EXO[e], mass, inertia, S, pt_n, pt_body, pt_c,
                       pt_beta, m_joint, m_sign, m_gain, jk, jd, jlo, jhi, sc, tau_act, forces)
            for c in range(4):
                F_mean[e, c, 0] += forces[c, 0] / n_sub
                F_mean[e, c, 1] += forces[c, 1] / n_sub
            if not ok:
                status[e] = k
                break


@njit(cache=True)
def points_kinematics(q, qd, S, pt_n, pt_body, pt_c, pt_beta, P, V):
    """Positions ``P`` (13, 2) and velocities ``V`` (13, 2) of every tracked point."""
    phi = np.empty(NB)
    phid = np.empty(NB)
    _angles(S, q, qd, phi, phid)
    pos = np.empty(2)
    J = np.empty((2, NQ))
    bias = np.empty(2)
    for p in range(NPOINT):
        _point(p, q, phi, phid, S, pt_n, pt_body, pt_c, pt_beta, pos, J, bias)
        P[p, 0] = pos[0]
        P[p, 1] = pos[1]
        vx = 0.0
        vz = 0.0
        for j in range(NQ):
            vx += J[0, j] * qd[j]
            vz += J[1, j] * qd[j]
        V[p, 0] = vx
        V[p, 1] = vz


@njit(cache=True)
def mass_matrix(q, mass, inertia, S, pt_n, pt_body, pt_c, pt_beta):
    phi = np.empty(NB)
    phid = np.zeros(NB)
    _angles(S, q, np.zeros(NQ), phi, phid)
    M = np.zeros((NQ, NQ))
    pos = np.empty(2)
    J = np.empty((2, NQ))
    bias = np.empty(2)
    for b in range(NB):
        _point(b, q, phi, phid, S, pt_n, pt_body, pt_c, pt_beta, pos, J, bias)
        for i in range(NQ):
            for j in range(NQ):
                M[i, j] += mass[b] * (J[0, i] * J[0, j] + J[1, i] * J[1, j]) + inertia[b] * S[b, i] * S[b, j]
    return M


# ------------------------------------------------------------ python helpers

def activation_step(a: float, u: float, dt: float, tau: float) -> float:
    """First-order activation update, clamped to [0, 1]."""
    if dt <= 0 or tau <= 0:
        raise ValueError("dt and tau must be positive")
    return min(1.0, max(0.0, a + dt / tau * (u - a)))


def contact_forces(P: np.ndarray, V: np.ndarray, contact) -> np.ndarray:
    """(4, 2) tangential/normal forces for heel_L, toe_L, heel_R, toe_R points."""
    out = np.zeros((4, 2))
    for c, p in enumerate(CONTACT_POINTS):
        out[c] = _contact_force(P[p, 1], V[p, 0], V[p, 1], contact.k_n, contact.c_n, contact.c_t, contact.mu)
    return out


def kinematics(packed: Packed, q, qd=None) -> tuple[np.ndarray, np.ndarray]:
    P = np.zeros((NPOINT, 2))
    V = np.zeros((NPOINT, 2))
    qd = np.zeros(NQ) if qd is None else np.asarray(qd, float)
    points_kinematics(np.asarray(q, float), qd, packed.S, packed.pt_n, packed.pt_body,
                      packed.pt_c, packed.pt_beta, P, V)
    return P, V


def mechanical_energy(packed: Packed, q, qd) -> float:
    """Kinetic + gravitational + passive-spring energy (joint limits included)."""
    q = np.asarray(q, float)
    qd = np.asarray(qd, float)
    M = mass_matrix(q, packed.mass, packed.inertia, packed.S, packed.pt_n, packed.pt_body,
                    packed.pt_c, packed.pt_beta)
    P, _ = kinematics(packed, q)
    ke = 0.5 * qd @ M @ qd
    pe = packed.scalars[G] * float(np.dot(packed.mass, P[:NB, 1]))
    qj = q[3:]
    pe += 0.5 * float(np.sum(packed.jk * qj ** 2))
    below = np.minimum(qj - packed.jlo, 0.0)
    above = np.maximum(qj - packed.jhi, 0.0)
    pe += 0.5 * packed.scalars[KLIM] * float(np.sum(below ** 2 + above ** 2))
    return float(ke + pe)


def run(packed: Packed, Q, QD, A, U, EXO, n_sub: int):
    """Python wrapper around :func:`simulate_batch` (arrays updated in place)."""
    E = Q.shape[0]
    F = np.zeros((E, 4, 2))
    status = np.full(E, -1, np.int64)
    simulate_batch(Q, QD, A, U, EXO, int(n_sub), packed.mass, packed.inertia, packed.S, packed.pt_n,
                   packed.pt_body, packed.pt_c, packed.pt_beta, packed.m_joint, packed.m_sign,
                   packed.m_gain, packed.jk, packed.jd, packed.jlo, packed.jhi, packed.scalars,
                   packed.tau_act, F, status)
    return F, status
