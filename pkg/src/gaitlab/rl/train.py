"""Two-stage training pipeline, checkpoints, progress logging and policy evaluation."""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
import torch

from ..errors import AllEpisodesFell, CheckpointMismatch, GaitLabError, InvalidConfig
from ..metrics import AnalysisConfig, SummaryRow, condition_summary
from ..recording import GaitRecording, ReferenceTrajectory, concatenate_recordings
from ..reward import RewardConfig
from ..sim.env import EnvConfig, VecWalkerEnv
from ..sim.model import WalkerModel, apply_weakness, attach_exoskeleton, build_walker
from ..sim.reference import default_reference
from ..sim.rollout import EpisodeConfig, rollout_episode
from ..sim.walker import OBS_LAYOUT, OBS_SIZE, OBS_VERSION
from .config import Stage, TrainConfig, TrainingSetup
from .networks import ObsNormalizer, PolicyPair
from .ppo import collect_rollout, ppo_update

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "gaitlab-ppo"
CHECKPOINT_VERSION = 1
PROGRESS_COLUMNS = ("step", "mean_return", "ep_len", "clip_fraction", "kl")


def layout_hash(policy: PolicyPair) -> str:
    doc = {"obs_version": OBS_VERSION, "obs": [list(x) for x in OBS_LAYOUT],
           "params": [[k, list(s)] for k, s in policy.layout()]}
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def set_deterministic(threads: int = 1) -> None:
    torch.set_num_threads(threads)
    torch.use_deterministic_algorithms(True)


# ---------------------------------------------------------------- optimizer

def _core_params(policy: PolicyPair) -> list[torch.nn.Parameter]:
    return list(policy.human.parameters()) + list(policy.critic.parameters())


def make_optimizer(policy: PolicyPair, lr: float) -> torch.optim.Adam:
    groups = [{"params": _core_params(policy)}]
    if policy.with_exo:
        groups.append({"params": list(policy.exo.parameters())})
    return torch.optim.Adam(groups, lr=lr, eps=1e-5)


def _load_optimizer(opt: torch.optim.Adam, state: dict, lr: float) -> None:
    """Load ``state`` even when ``opt`` has an extra (fresh) exo param group."""
    state = copy.deepcopy(state)
    groups = state["param_groups"]
    if len(opt.param_groups) > len(groups):
        start = sum(len(g["params"]) for g in groups)
        extra = copy.deepcopy(groups[0])
        extra["params"] = list(range(start, start + len(opt.param_groups[-1]["params"])))
        groups.append(extra)
    for g in groups:
        g["lr"] = lr
    opt.load_state_dict(state)


# -------------------------------------------------------------- checkpoints

@dataclass
class Checkpoint:
    policy: PolicyPair
    normalizer: ObsNormalizer
    train: TrainConfig
    reward: RewardConfig
    model_config: dict
    step: int = 0
    updates: int = 0
    optimizer_state: dict | None = None
    resume: dict | None = None  # env snapshot, last obs, torch generator state


def save_checkpoint(path, ckpt: Checkpoint) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "layout_hash": layout_hash(ckpt.policy),
        "obs_size": OBS_SIZE,
        "with_exo": ckpt.policy.with_exo,
        "hidden": list(ckpt.policy.hidden),
        "policy": ckpt.policy.state_dict(),
        "normalizer": ckpt.normalizer.state_dict(),
        "train": ckpt.train.to_dict(),
        "reward": {k: (dict(v) if k == "joint_weights" else v) for k, v in ckpt.reward.__dict__.items()},
        "model_config": ckpt.model_config,
        "step": ckpt.step,
        "updates": ckpt.updates,
        "optimizer": ckpt.optimizer_state,
        "resume": ckpt.resume,
    }
    torch.save(doc, path)
    return path


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        doc = torch.load(path, weights_only=False)
    except Exception as exc:  # not a torch file at all
        raise CheckpointMismatch(f"unreadable checkpoint {path}: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointMismatch(f"{path} is not a {CHECKPOINT_FORMAT} checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointMismatch(f"checkpoint version {doc.get('version')} != {CHECKPOINT_VERSION}")
    if doc.get("obs_size") != OBS_SIZE:
        raise CheckpointMismatch(f"observation size {doc.get('obs_size')} != {OBS_SIZE}")
    policy = PolicyPair(OBS_SIZE, tuple(doc["hidden"]), with_exo=doc["with_exo"])
    if doc["layout_hash"] != layout_hash(policy):
        raise CheckpointMismatch(f"layout hash {doc['layout_hash']} != {layout_hash(policy)}")
    policy.load_state_dict(doc["policy"])
    norm = ObsNormalizer(OBS_SIZE)
    norm.load_state_dict(doc["normalizer"])
    reward = dict(doc["reward"])
    reward["joints"] = tuple(reward["joints"])
    reward["end_effectors"] = tuple(reward["end_effectors"])
    return Checkpoint(policy, norm, TrainConfig(**doc["train"]), RewardConfig(**reward),
                      doc["model_config"], doc["step"], doc["updates"], doc["optimizer"], doc["resume"])


# ----------------------------------------------------------------- training

@dataclass
class TrainResult:
    policy: PolicyPair
    normalizer: ObsNormalizer
    history: list[dict] = field(default_factory=list)
    episode_returns: list[tuple[int, float]] = field(default_factory=list)  # (step, return)
    checkpoint: Path | None = None


def stage_model(setup: TrainingSetup) -> WalkerModel:
    """Walker for the configured stage: weakened right side, exo for joint training."""
    cfg = setup.train
    model_cfg = dict(setup.model)
    if cfg.stage is Stage.BASELINE:
        if model_cfg.get("exo"):
            raise InvalidConfig("exo", "baseline stage trains without an exoskeleton")
        if cfg.alpha != 1.0 or model_cfg.get("alpha_R", 1.0) != 1.0 or model_cfg.get("alpha_L", 1.0) != 1.0:
            raise InvalidConfig("alpha", "baseline stage trains the unimpaired model (alpha = 1)")
    model_cfg.pop("exo", None)
    model = build_walker(model_cfg)
    if cfg.stage is not Stage.BASELINE:
        model = apply_weakness(model, cfg.alpha, "R")
    if cfg.stage is Stage.JOINT_EXO:
        model = attach_exoskeleton(model)
    return model


class Trainer:
    def __init__(self, setup: TrainingSetup, model: WalkerModel, policy: PolicyPair,
                 normalizer: ObsNormalizer, ref: ReferenceTrajectory | None = None,
                 optimizer_state: dict | None = None, step: int = 0, updates: int = 0,
                 resume: dict | None = None):
        self.setup = setup
        self.cfg = setup.train
        self.model = model
        self.policy = policy
        self.normalizer = normalizer
        self.ref = ref or default_reference(model)
        set_deterministic(self.cfg.threads)
        self.generator = torch.Generator().manual_seed(self.cfg.seed)
        self.env = VecWalkerEnv(model, self.ref, setup.reward, n_envs=self.cfg.n_envs, seed=self.cfg.seed,
                                cfg=EnvConfig(max_time=self.cfg.episode_time))
        self.optimizer = make_optimizer(policy, self.cfg.learning_rate)
        if optimizer_state is not None:
            _load_optimizer(self.optimizer, optimizer_state, self.cfg.learning_rate)
        self.step = step
        self.updates = updates
        self.obs = None
        if resume is not None:
            self.env.restore(resume["env"])
            self.obs = np.array(resume["obs"], float)
            self.generator.set_state(torch.tensor(resume["generator"], dtype=torch.uint8))

    def checkpoint(self) -> Checkpoint:
        resume = None
        if self.obs is not None:
            resume = {"env": self.env.snapshot(), "obs": self.obs.tolist(),
                      "generator": self.generator.get_state().tolist()}
        return Checkpoint(self.policy, self.normalizer, self.cfg, self.setup.reward, dict(self.setup.model),
                          self.step, self.updates, copy.deepcopy(self.optimizer.state_dict()), resume)

    def run(self, out_dir=None, on_update: Callable[[dict], None] | None = None) -> TrainResult:
        out = Path(out_dir) if out_dir is not None else None
        writer = None
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            progress = out / "progress.csv"
            fresh = not progress.exists() or self.step == 0
            fh = progress.open("w" if fresh else "a", newline="", encoding="utf-8")
            writer = csv.writer(fh)
            if fresh:
                writer.writerow(PROGRESS_COLUMNS)
        result = TrainResult(self.policy, self.normalizer)
        per_update = self.cfg.samples_per_update
        try:
            while self.step + per_update <= self.cfg.total_steps:
                batch, self.obs = collect_rollout(self.env, self.policy, self.normalizer, self.cfg.rollout_steps,
                                                  self.generator, self.obs)
                stats = ppo_update(batch, self.policy, self.optimizer, self.cfg, self.generator)
                self.step += per_update
                self.updates += 1
                rets = batch.episode_returns
                row = {
                    "step": self.step,
                    "mean_return": float(np.mean(rets)) if rets else math.nan,
                    "ep_len": float(np.mean(batch.episode_lengths)) if rets else math.nan,
                    "clip_fraction": stats["clip_fraction"],
                    "kl": stats["kl"],
                    **{k: v for k, v in stats.items() if k not in ("clip_fraction", "kl")},
                    "episodes": len(rets),
                }
                result.history.append(row)
                result.episode_returns += [(self.step, r) for r in rets]
                if writer is not None:
                    writer.writerow([_csv_num(row[c]) for c in PROGRESS_COLUMNS])
                    fh.flush()
                log.info("step %d return %.3f len %.1f kl %.2e clip %.3f", self.step, row["mean_return"],
                         row["ep_len"], row["kl"], row["clip_fraction"])
                if on_update is not None:
                    on_update(row)
                every = self.cfg.checkpoint_every
                if out is not None and every and self.updates % every == 0:
                    save_checkpoint(out / f"checkpoint_{self.updates:05d}.pt", self.checkpoint())
        finally:
            if writer is not None:
                fh.close()
        if out is not None:
            result.checkpoint = save_checkpoint(out / "checkpoint_final.pt", self.checkpoint())
        return result


def _csv_num(x) -> str:
    if isinstance(x, float):
        return "" if math.isnan(x) else format(x, ".10g")
    return str(x)


def train_stage1(setup: TrainingSetup, out_dir=None, **kw) -> TrainResult:
    """Baseline policy on the unimpaired walker without an exoskeleton."""
    if setup.train.stage is not Stage.BASELINE:
        raise InvalidConfig("stage", "train_stage1 runs the baseline stage")
    model = stage_model(setup)
    torch.manual_seed(setup.train.seed)
    policy = PolicyPair(OBS_SIZE, setup.train.hidden, init_log_std=setup.train.init_log_std)
    return Trainer(setup, model, policy, ObsNormalizer(OBS_SIZE)).run(out_dir, **kw)


def train_stage2(setup: TrainingSetup, baseline, out_dir=None, **kw) -> TrainResult:
    """Fine-tune a baseline checkpoint under right-side weakness (optionally with the exo).

    The human actor, critic, normalizer and optimizer state carry over; in
    joint-exo mode a fresh exo actor is added and both actors train together.
    """
    cfg = setup.train
    if cfg.stage is Stage.BASELINE:
        raise InvalidConfig("stage", "train_stage2 needs weakness-transfer or joint-exo")
    base = baseline if isinstance(baseline, Checkpoint) else load_checkpoint(baseline)
    if base.policy.with_exo:
        raise CheckpointMismatch("stage-2 must start from a baseline (human-only) checkpoint")
    if tuple(base.train.hidden) != tuple(cfg.hidden):
        raise CheckpointMismatch(f"hidden layers {base.train.hidden} != {cfg.hidden}")
    model = stage_model(setup)
    policy = copy.deepcopy(base.policy)
    if cfg.stage is Stage.JOINT_EXO:
        torch.manual_seed(cfg.seed + 1)
        policy.add_exo(cfg.init_log_std)
    norm = copy.deepcopy(base.normalizer)
    trainer = Trainer(setup, model, policy, norm, optimizer_state=base.optimizer_state)
    return trainer.run(out_dir, **kw)


def resume_training(path, out_dir=None, total_steps: int | None = None, **kw) -> TrainResult:
    ckpt = load_checkpoint(path)
    train = ckpt.train if total_steps is None else replace(ckpt.train, total_steps=total_steps)
    setup = TrainingSetup(train, ckpt.reward, ckpt.model_config)
    trainer = Trainer(setup, stage_model(setup), ckpt.policy, ckpt.normalizer,
                      optimizer_state=ckpt.optimizer_state, step=ckpt.step, updates=ckpt.updates,
                      resume=ckpt.resume)
    return trainer.run(out_dir, **kw)


def learning_progress(episode_returns: list[tuple[int, float]], total_steps: int,
                      fraction: float = 0.1) -> tuple[float, float]:
    """Mean episode return in the first and last ``fraction`` of training steps."""
    early = [r for s, r in episode_returns if s <= fraction * total_steps]
    late = [r for s, r in episode_returns if s > (1 - fraction) * total_steps]
    if not early or not late:
        raise GaitLabError("no finished episodes in the first or last window of training")
    return float(np.mean(early)), float(np.mean(late))


# --------------------------------------------------------------- evaluation

class ActorPolicy:
    """Deterministic (distribution-mean) adapter around a trained actor."""

    def __init__(self, actor, normalizer: ObsNormalizer, scalar: bool = False):
        self.actor = actor
        self.normalizer = normalizer
        self.scalar = scalar

    def reset(self, seed: int | None = None) -> None:
        pass

    @torch.no_grad()
    def act(self, obs: np.ndarray):
        o = torch.as_tensor(self.normalizer(np.asarray(obs, float))[None], dtype=torch.float32)
        a = self.actor.deterministic(o)[0].numpy().astype(float)
        return float(a[0]) if self.scalar else a


def policies_from_checkpoint(ckpt: Checkpoint):
    human = ActorPolicy(ckpt.policy.human, ckpt.normalizer)
    exo = ActorPolicy(ckpt.policy.exo, ckpt.normalizer, scalar=True) if ckpt.policy.with_exo else None
    return human, exo


@dataclass
class Evaluation:
    recording: GaitRecording
    summary: SummaryRow
    episodes: list[GaitRecording]


def evaluate_policy(human, model: WalkerModel, episodes: int = 1, exo=None, seed: int = 0,
                    duration: float = 20.0, condition: str = "", analysis: AnalysisConfig | None = None,
                    init_noise: float = 0.02) -> Evaluation:
    """Run ``episodes`` episodes, join them and summarize the gait.

    Episodes use seeds ``seed, seed + 1, ...``. Raises ``AllEpisodesFell``
    when every episode fell and no analyzable cycles remain.
    """
    recs = [rollout_episode(model, human, exo,
                            EpisodeConfig(duration=duration, seed=seed + k, condition=condition,
                                          init_noise=init_noise))
            for k in range(episodes)]
    joined = recs[0] if len(recs) == 1 else concatenate_recordings(recs)
    try:
        row = condition_summary(joined, analysis)
    except GaitLabError as exc:
        if all(r.meta.get("fell") == "true" for r in recs):
            raise AllEpisodesFell(f"all {episodes} episode(s) fell; no analyzable cycles ({exc})") from None
        raise
    return Evaluation(joined, row, recs)
