"""Planar 7-segment walker model: anthropometry, muscle units, weakness and exoskeleton."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..errors import AlphaOutOfRange, AlreadyAttached, InvalidConfig

SEGMENTS = ("trunk", "thigh_L", "shank_L", "foot_L", "thigh_R", "shank_R", "foot_R")
# generalized coordinates: pelvis x, z, trunk pitch, then joint angles
COORDS = ("x", "z", "pitch", "hip_L", "knee_L", "ankle_L", "hip_R", "knee_R", "ankle_R")
JOINT_COORDS = COORDS[3:]
MUSCLES = tuple(f"{m}_{s}" for s in ("L", "R") for m in (
    "hip_flexor", "hip_extensor", "knee_flexor", "knee_extensor", "ankle_dorsiflexor", "ankle_plantarflexor"))

EXO_PEAK_TORQUE = 100.0  # N*m at command -1
EXO_MASS = 1.165  # kg, on the distal right shank
EXO_RANGE = (-1.0, 0.0)


@dataclass(frozen=True)
class Segment:
    mass: float
    length: float
    inertia: float  # about the COM, kg*m^2
    com: float  # distance of COM from the proximal joint along the segment


@dataclass(frozen=True)
class Foot:
    """Foot geometry in the foot frame (forward, down) measured from the ankle."""

    heel: float = -0.06
    toe: float = 0.20
    height: float = 0.07
    com_forward: float = 0.07


@dataclass(frozen=True)
class JointParams:
    lower: float
    upper: float
    stiffness: float  # N*m/rad about rest angle 0
    damping: float  # N*m*s/rad


@dataclass(frozen=True)
class MuscleGains:
    """Peak torque (N*m) of each antagonistic unit at full activation."""

    hip_flexor: float = 180.0
    hip_extensor: float = 200.0
    knee_flexor: float = 150.0
    knee_extensor: float = 250.0
    ankle_dorsiflexor: float = 80.0
    ankle_plantarflexor: float = 220.0


@dataclass(frozen=True)
class ContactParams:
    k_n: float = 1e5
    c_n: float = 1e3
    c_t: float = 2e3
    mu: float = 0.8


@dataclass(frozen=True)
class ExoSpec:
    peak_torque: float = EXO_PEAK_TORQUE
    mass: float = EXO_MASS
    command_range: tuple[float, float] = EXO_RANGE


def _default_segments() -> dict[str, Segment]:
    # 80 kg / 1.75 m adult; mass fractions and radii of gyration after standard tables
    trunk = Segment(54.24, 0.82, 2.8, 0.30)
    thigh = Segment(8.0, 0.43, 0.154, 0.186)
    shank = Segment(3.72, 0.43, 0.063, 0.186)
    foot = Segment(1.16, 0.26, 0.0177, 0.07)
    return {"trunk": trunk, "thigh_L": thigh, "shank_L": shank, "foot_L": foot,
            "thigh_R": thigh, "shank_R": shank, "foot_R": foot}


def _default_joints() -> dict[str, JointParams]:
    hip = JointParams(-0.8, 1.6, 5.0, 4.0)
    knee = JointParams(0.0, 2.4, 2.0, 3.0)  # knee coordinate is flexion-positive
    ankle = JointParams(-0.7, 0.5, 8.0, 1.5)  # dorsiflexion-positive
    return {"hip": hip, "knee": knee, "ankle": ankle}


@dataclass(frozen=True)
class WalkerModel:
    segments: dict[str, Segment] = field(default_factory=_default_segments)
    foot: Foot = field(default_factory=Foot)
    joints: dict[str, JointParams] = field(default_factory=_default_joints)
    gains: MuscleGains = field(default_factory=MuscleGains)
    activation_tau: float = 0.02
    alpha_L: float = 1.0
    alpha_R: float = 1.0
    contact: ContactParams = field(default_factory=ContactParams)
    limit_stiffness: float = 600.0
    limit_damping: float = 10.0
    gravity: float = 9.81
    exo: ExoSpec | None = None
    physics_rate: float = 1200.0
    control_rate: float = 30.0

    @property
    def total_mass(self) -> float:
        return float(sum(s.mass for s in self.segments.values()))

    @property
    def leg_length(self) -> float:
        return self.segments["thigh_L"].length + self.segments["shank_L"].length + self.foot.height

    @property
    def substeps(self) -> int:
        return int(round(self.physics_rate / self.control_rate))

    def muscle_gains(self) -> np.ndarray:
        """Baseline peak torques, MUSCLES order."""
        g = self.gains
        per_side = [g.hip_flexor, g.hip_extensor, g.knee_flexor, g.knee_extensor,
                    g.ankle_dorsiflexor, g.ankle_plantarflexor]
        return np.array(per_side * 2, float)

    def effective_gains(self) -> np.ndarray:
        """Peak torques after weakness scaling (gain x alpha)."""
        alpha = np.repeat([self.alpha_L, self.alpha_R], 6)
        return self.muscle_gains() * alpha

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# muscle unit -> (joint coordinate index, torque sign)
MUSCLE_JOINT = np.array([3, 3, 4, 4, 5, 5, 6, 6, 7, 7, 8, 8], dtype=np.int64)
MUSCLE_SIGN = np.array([1, -1, 1, -1, 1, -1] * 2, dtype=float)


def _validate(model: WalkerModel) -> None:
    for name, seg in model.segments.items():
        for attr in ("mass", "length", "inertia"):
            v = getattr(seg, attr)
            if not (isinstance(v, (int, float)) and v > 0):
                raise InvalidConfig(f"{name}.{attr}", "must be positive")
    if set(model.segments) != set(SEGMENTS):
        raise InvalidConfig("segments", f"expected {SEGMENTS}")
    for attr in ("hip_flexor", "hip_extensor", "knee_flexor", "knee_extensor",
                 "ankle_dorsiflexor", "ankle_plantarflexor"):
        if getattr(model.gains, attr) <= 0:
            raise InvalidConfig(f"gains.{attr}", "must be positive")
    if model.activation_tau <= 0:
        raise InvalidConfig("activation_tau", "must be positive")
    for side in ("alpha_L", "alpha_R"):
        a = getattr(model, side)
        if not 0 < a <= 1:
            raise AlphaOutOfRange(f"{side}={a} outside (0, 1]")
    c = model.contact
    for attr in ("k_n", "c_n", "c_t", "mu"):
        if getattr(c, attr) < 0:
            raise InvalidConfig(f"contact.{attr}", "must be non-negative")
    if model.physics_rate <= 0 or model.control_rate <= 0:
        raise InvalidConfig("physics_rate", "rates must be positive")
    if model.exo is not None and tuple(model.exo.command_range) != EXO_RANGE:
        raise InvalidConfig("exo.command_range", "must be exactly [-1, 0]")


_SIDE_ALIASES = {"thigh": ("thigh_L", "thigh_R"), "shank": ("shank_L", "shank_R"),
                 "foot": ("foot_L", "foot_R"), "trunk": ("trunk",)}


def build_walker(config: dict | None = None) -> WalkerModel:
    """Build a model from a (possibly partial) config dict.

    Segment keys may name one side (``thigh_L``) or both (``thigh``).
    """
    config = dict(config or {})
    segs = _default_segments()
    for key, spec in (config.pop("segments", None) or {}).items():
        targets = _SIDE_ALIASES.get(key, (key,))
        for t in targets:
            if t not in segs:
                raise InvalidConfig(f"segments.{key}", "unknown segment")
            try:
                segs[t] = dataclasses.replace(segs[t], **spec)
            except TypeError as exc:
                raise InvalidConfig(f"segments.{key}", str(exc)) from None
        for attr, v in spec.items():
            if not (isinstance(v, (int, float)) and v > 0):
                raise InvalidConfig(f"{key}.{attr}", "must be positive")
    kwargs: dict = {"segments": segs}
    nested = {"foot": Foot, "gains": MuscleGains, "contact": ContactParams}
    for key, cls in nested.items():
        if key in config:
            try:
                kwargs[key] = cls(**config.pop(key))
            except TypeError as exc:
                raise InvalidConfig(key, str(exc)) from None
    if "joints" in config:
        joints = _default_joints()
        for jname, spec in config.pop("joints").items():
            if jname not in joints:
                raise InvalidConfig(f"joints.{jname}", "unknown joint")
            joints[jname] = dataclasses.replace(joints[jname], **spec)
        kwargs["joints"] = joints
    exo = config.pop("exo", False)
    alpha_L = config.pop("alpha_L", 1.0)
    alpha_R = config.pop("alpha_R", 1.0)
    for key in list(config):
        if key not in WalkerModel.__dataclass_fields__ or key in ("exo", "segments"):
            raise InvalidConfig(key, "unknown model config key")
    kwargs.update(config)
    model = WalkerModel(**kwargs)
    _validate(model)
    if alpha_L != 1.0:
        model = apply_weakness(model, alpha_L, "L")
    if alpha_R != 1.0:
        model = apply_weakness(model, alpha_R, "R")
    if exo:
        model = attach_exoskeleton(model)
    return model


def load_model_config(path) -> dict:
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(doc, dict):
        raise InvalidConfig("model config", "top level must be a mapping")
    return doc.get("model", doc)


def apply_weakness(model: WalkerModel, alpha: float, side: str = "R") -> WalkerModel:
    """Scale every muscle unit on ``side`` by ``alpha`` (multiplicative on repeat)."""
    if not 0 < alpha <= 1:
        raise AlphaOutOfRange(f"alpha={alpha} outside (0, 1]")
    side = {"Left": "L", "Right": "R"}.get(side, side)
    if side not in ("L", "R"):
        raise ValueError(f"side must be 'L' or 'R', got {side!r}")
    if alpha == 1.0:
        return model
    field_name = f"alpha_{side}"
    return dataclasses.replace(model, **{field_name: getattr(model, field_name) * alpha})


def attach_exoskeleton(model: WalkerModel, exo: ExoSpec | None = None) -> WalkerModel:
    """Add the exo point mass at the distal right shank and register the ankle actuator."""
    if model.exo is not None:
        raise AlreadyAttached("exoskeleton already attached")
    exo = exo or ExoSpec()
    shank = model.segments["shank_R"]
    m = shank.mass + exo.mass
    com = (shank.mass * shank.com + exo.mass * shank.length) / m
    inertia = (shank.inertia + shank.mass * (shank.com - com) ** 2
               + exo.mass * (shank.length - com) ** 2)
    segs = dict(model.segments)
    segs["shank_R"] = Segment(m, shank.length, inertia, com)
    return dataclasses.replace(model, segments=segs, exo=exo)


def exo_torque(command: float, peak_torque: float = EXO_PEAK_TORQUE) -> float:
    """Map a command in [-1, 0] to ankle torque; negative is plantarflexion."""
    c = min(EXO_RANGE[1], max(EXO_RANGE[0], float(command)))
    return c * peak_torque


def clamp_exo_command(command: float) -> tuple[float, bool]:
    c = float(command)
    clamped = min(EXO_RANGE[1], max(EXO_RANGE[0], c))
    return clamped, clamped != c


def active_joint_torques(model: WalkerModel, activation) -> np.ndarray:
    """Net muscle torque on each joint coordinate (``JOINT_COORDS`` order).

    Same map the integrator applies: sign x effective gain x activation,
    summed over the antagonistic pair.
    """
    a = np.asarray(activation, float)
    if a.shape != (len(MUSCLES),):
        raise ValueError(f"expected {len(MUSCLES)} activations, got shape {a.shape}")
    out = np.zeros(len(JOINT_COORDS))
    np.add.at(out, MUSCLE_JOINT - 3, MUSCLE_SIGN * model.effective_gains() * a)
    return out
