"""Training configuration, presets and YAML loading."""

from __future__ import annotations

import enum
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from ..errors import InvalidConfig
from ..reward import RewardConfig


class Stage(str, enum.Enum):
    BASELINE = "baseline"
    WEAKNESS_TRANSFER = "weakness-transfer"
    JOINT_EXO = "joint-exo"


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    learning_rate: float = 5e-5
    clip_range: float = 0.15
    rollout_steps: int = 2048  # per environment, per update
    epochs: int = 20
    batch_size: int = 16384  # minibatch size
    n_envs: int = 32
    total_steps: int = 400_000_000
    stage: Stage = Stage.BASELINE
    alpha: float = 1.0
    seed: int = 0
    hidden: tuple[int, ...] = (64, 64)
    init_log_std: float = -0.5
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    max_grad_norm: float = 0.5
    episode_time: float = 10.0  # s before truncation
    checkpoint_every: int = 0  # updates; 0 = only the final checkpoint
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "stage", Stage(self.stage))
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        checks = [
            ("gamma", 0 < self.gamma <= 1, "must be in (0, 1]"),
            ("gae_lambda", 0 <= self.gae_lambda <= 1, "must be in [0, 1]"),
            ("clip_range", self.clip_range > 0, "must be positive"),
            ("learning_rate", self.learning_rate > 0, "must be positive"),
            ("alpha", 0 < self.alpha <= 1, "must be in (0, 1]"),
        ]
        for name in ("rollout_steps", "epochs", "batch_size", "n_envs", "total_steps"):
            checks.append((name, getattr(self, name) >= 1, "must be >= 1"))
        for name, ok, why in checks:
            if not ok:
                raise InvalidConfig(name, why)

    @property
    def samples_per_update(self) -> int:
        return self.rollout_steps * self.n_envs

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stage"] = self.stage.value
        d["hidden"] = list(self.hidden)
        return d


PRESETS = {
    # the published protocol; kept for completeness, far beyond a desk budget
    "paper": dict(n_envs=32, batch_size=16384, rollout_steps=2048, total_steps=400_000_000),
    "desk": dict(n_envs=8, batch_size=2048, rollout_steps=256, total_steps=200_000),
}


def preset(name: str, **overrides) -> TrainConfig:
    if name not in PRESETS:
        raise InvalidConfig("preset", f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    if name == "paper":
        warnings.warn("paper-scale preset (4e8 steps) is not a tested target", stacklevel=2)
    return TrainConfig(**{**PRESETS[name], **overrides})


@dataclass
class TrainingSetup:
    """Everything a training run reads from its config file."""

    train: TrainConfig = field(default_factory=TrainConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    model: dict = field(default_factory=dict)


def load_training_setup(path=None, preset_name: str | None = None, **overrides) -> TrainingSetup:
    """YAML with optional ``train``, ``reward`` and ``model`` sections.

    Precedence: keyword overrides, then the file, then the preset, then defaults.
    """
    doc = {}
    if path is not None:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        if not isinstance(doc, dict):
            raise InvalidConfig("config", "top level must be a mapping")
    train_doc = dict(doc.get("train") or {})
    known = {f.name for f in fields(TrainConfig)}
    unknown = set(train_doc) - known
    if unknown:
        raise InvalidConfig(sorted(unknown)[0], "unknown train key")
    base = dict(PRESETS[preset_name]) if preset_name else {}
    if preset_name == "paper":
        warnings.warn("paper-scale preset (4e8 steps) is not a tested target", stacklevel=2)
    elif preset_name is not None and preset_name not in PRESETS:
        raise InvalidConfig("preset", f"unknown preset {preset_name!r}")
    merged = {**base, **train_doc, **{k: v for k, v in overrides.items() if v is not None}}
    train = TrainConfig(**merged)
    return TrainingSetup(train, RewardConfig.from_dict(doc.get("reward")), dict(doc.get("model") or {}))


def with_stage(cfg: TrainConfig, stage: Stage | str, alpha: float | None = None) -> TrainConfig:
    return replace(cfg, stage=Stage(stage), alpha=cfg.alpha if alpha is None else alpha)
