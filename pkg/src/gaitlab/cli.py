"""``gaitlab`` command line: simulate, train, analyze and report.

Every command that writes files also writes ``manifest.json`` next to them.
Exit codes: 0 success, 1 domain error (message on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as _dt
import hashlib
import json
import logging
import sys
from importlib import resources
from pathlib import Path

import yaml

from . import __version__
from .errors import GaitLabError

log = logging.getLogger("gaitlab")

MANIFEST = "manifest.json"


# ------------------------------------------------------------------ helpers

def data_path(name: str) -> Path:
    """Path of a file bundled in ``gaitlab/data``."""
    return Path(str(resources.files("gaitlab") / "data" / name))


def _require_file(path) -> Path:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return path


def _read_yaml(path) -> dict:
    doc = yaml.safe_load(_require_file(path).read_text(encoding="utf-8")) or {}
    if not isinstance(doc, dict):
        raise GaitLabError(f"{path}: top level must be a mapping")
    return doc


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def write_manifest(out_dir: Path, command: str, argv: list[str], config: dict, seed: int | None,
                   artifacts: list[Path]) -> Path:
    """Record how the outputs in ``out_dir`` were made, with a content hash per artifact."""
    out_dir = Path(out_dir)
    doc = {
        "command": command,
        "argv": list(argv),
        "config": config,
        "config_hash": config_hash(config),
        "seed": seed,
        "artifacts": {_rel(p, out_dir): _sha256(Path(p)) for p in sorted(set(map(Path, artifacts)))},
        "tool_version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    path = out_dir / MANIFEST
    path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def _rel(p: Path, base: Path) -> str:
    try:
        return str(Path(p).resolve().relative_to(base.resolve()))
    except ValueError:
        return str(p)


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ------------------------------------------------------------------ analyze

def analyze_recording(input_path, out_dir, config: dict | None = None, condition: str | None = None,
                      figures: bool = True):
    """Summarize one recording and write summary, plot CSVs and figures. Returns (row, files)."""
    from . import report
    from .metrics import AnalysisConfig, condition_summary
    from .recording import load_recording

    rec = load_recording(_require_file(input_path))
    if condition:
        rec = dataclasses.replace(rec, condition=condition)
    cfg = AnalysisConfig.from_dict(config)
    row = condition_summary(rec, cfg)
    out = _out_dir(out_dir)
    files = list(report.write_summary(row, out))
    files += list(report.plot_data(row, rec, out, n=cfg.n_points + 1).values())
    if figures:
        from . import figures as fig

        files += fig.render_all(out, title=row.condition)
    return row, files


def cmd_analyze(args) -> int:
    from . import report

    config = _read_yaml(args.config).get("analysis", {}) if args.config else {}
    out = Path(args.out or f"{Path(args.input).stem}_analysis")
    row, files = analyze_recording(args.input, out, config, args.condition, figures=not args.no_figures)
    write_manifest(out, "analyze", args.argv, {"input": str(args.input), "analysis": config}, None, files)
    if args.format == "json":
        print(json.dumps(row.to_dict(), indent=2, ensure_ascii=False))
    else:
        print(report.render_table([row]), end="")
    return 0


# ----------------------------------------------------------------- simulate

def _model_from_args(args):
    from .sim.model import apply_weakness, attach_exoskeleton, build_walker, load_model_config

    model = build_walker(load_model_config(_require_file(args.model_config)) if args.model_config else None)
    model = apply_weakness(model, args.alpha, "R")
    if args.exo and model.exo is None:
        model = attach_exoskeleton(model)
    return model


def _policies_from_args(args, model):
    from .sim.policies import ConstantExoPolicy, PushOffExoPolicy, scripted_policy

    def scripted_exo():
        if args.exo_profile == "constant":
            return ConstantExoPolicy(args.exo_command)
        return PushOffExoPolicy(args.exo_command)

    spec = args.policy
    if spec.startswith("checkpoint:") or spec.endswith(".pt"):
        from .rl.train import load_checkpoint, policies_from_checkpoint

        ckpt = load_checkpoint(spec.split(":", 1)[1] if spec.startswith("checkpoint:") else spec)
        human, exo = policies_from_checkpoint(ckpt)
        if model.exo is not None and exo is None:
            exo = scripted_exo()
        return human, exo
    try:
        human = scripted_policy(spec)
    except ValueError as exc:
        raise GaitLabError(str(exc)) from None
    exo = scripted_exo() if model.exo is not None else None
    return human, exo


def cmd_simulate(args) -> int:
    from .recording import write_recording
    from .report import condition_label
    from .sim.rollout import EpisodeConfig, rollout_episode

    model = _model_from_args(args)
    human, exo = _policies_from_args(args, model)
    label = args.condition or condition_label(args.alpha, model.exo is not None)
    cfg = EpisodeConfig(duration=args.duration, seed=args.seed, condition=label)
    rec = rollout_episode(model, human, exo, cfg)
    rec = dataclasses.replace(rec, meta={**rec.meta, "policy": args.policy})
    out = _out_dir(args.out)
    path = write_recording(rec, out / "recording.csv")
    config = {"alpha": args.alpha, "exo": bool(args.exo), "exo_command": args.exo_command,
              "exo_profile": args.exo_profile,
              "policy": args.policy, "duration": args.duration, "model_hash": model.config_hash()}
    write_manifest(out, "simulate", args.argv, config, args.seed, [path])
    fell = rec.meta.get("fell") == "true"
    print(f"{path}: {rec.n_samples} samples ({rec.duration:.2f} s){' - walker fell' if fell else ''}")
    return 0


# -------------------------------------------------------------------- train

def cmd_train(args) -> int:
    from .rl.config import Stage, load_training_setup
    from .rl.train import resume_training, train_stage1, train_stage2

    out = _out_dir(args.out)
    if args.resume:
        result = resume_training(_require_file(args.resume), out, total_steps=args.total_steps)
        setup_dict = {"resume": str(args.resume)}
        seed = None
    else:
        stage = Stage(args.stage)
        overrides = {"stage": stage, "seed": args.seed, "total_steps": args.total_steps, "alpha": args.alpha,
                     "learning_rate": args.learning_rate}
        setup = load_training_setup(args.config, args.preset, **overrides)
        if stage is not Stage.BASELINE and setup.train.alpha == 1.0:
            # stage 2 trains the impaired walker; half strength unless configured
            setup = dataclasses.replace(setup, train=dataclasses.replace(setup.train, alpha=0.5))
        if stage is Stage.BASELINE:
            if args.from_checkpoint:
                raise GaitLabError("--from is only used by the weakness-transfer and joint-exo stages")
            result = train_stage1(setup, out)
        else:
            if not args.from_checkpoint:
                raise GaitLabError(f"stage {stage.value} needs --from <baseline checkpoint>")
            result = train_stage2(setup, _require_file(args.from_checkpoint), out)
        setup_dict = {"train": setup.train.to_dict(), "model": setup.model,
                      "from": str(args.from_checkpoint) if args.from_checkpoint else None}
        seed = setup.train.seed
    files = [p for p in out.iterdir() if p.suffix in (".pt", ".csv")]
    write_manifest(out, "train", args.argv, setup_dict, seed, files)
    hist = result.history
    if hist:
        print(f"{len(hist)} updates, {hist[-1]['step']} steps; last mean return {hist[-1]['mean_return']:.4f}")
    print(f"checkpoint: {result.checkpoint}")
    return 0


# ------------------------------------------------------------------- report

def _summary_file(p: str) -> Path:
    path = Path(p)
    return path / "summary.json" if path.is_dir() else path


def cmd_report(args) -> int:
    from . import report

    paths = [_summary_file(p) for p in args.summaries]
    rows = report.load_summaries(paths)
    text = report.render_table(rows)
    out = Path(args.out) if args.out else None
    files: list[Path] = []
    if out is not None:
        _out_dir(out)
        table = out / "table.txt"
        table.write_text(text, encoding="utf-8")
        doc = out / "table.json"
        doc.write_text(json.dumps([r.to_dict() for r in rows], indent=2, ensure_ascii=False) + "\n",
                       encoding="utf-8")
        files += [table, doc]
        cmp_csv = report.comparison_data([p.parent for p in paths], [r.condition for r in rows],
                                         out / "fig4_comparison.csv")
        if cmp_csv is not None:
            files.append(cmp_csv)
            if not args.no_figures:
                from . import figures as fig

                files.append(fig.comparison(cmp_csv))
        write_manifest(out, "report", args.argv, {"summaries": [str(p) for p in paths]}, None, files)
    if args.format == "json":
        print(json.dumps([r.to_dict() for r in rows], indent=2, ensure_ascii=False))
    else:
        print(text, end="")
    return 0


# -------------------------------------------------------------- gen-fixture

def cmd_gen_fixture(args) -> int:
    from . import fixtures

    out = _out_dir(args.out)
    if args.kind == "symmetric":
        made = [("fixture_symmetric", fixtures.symmetric_fixture())]
    elif args.kind == "table1-row":
        if args.row not in fixtures.TABLE1_FILES:
            raise GaitLabError(f"table1-row needs --row in {sorted(fixtures.TABLE1_FILES)}")
        made = [(fixtures.TABLE1_FILES[args.row], fixtures.table1_fixture(args.row))]
    else:
        sis = tuple(args.si) if args.si else (6.4, -12.9, -25.8, -47.1)
        made = [(f"fixture_sweep_{k + 1}", fx) for k, fx in enumerate(fixtures.weakness_sweep(sis))]
    files: list[Path] = []
    for stem, fx in made:
        files += list(fx.write(out / stem))
        print(out / f"{stem}.csv")
    write_manifest(out, "gen-fixture", args.argv, {"kind": args.kind, "row": args.row, "si": args.si}, None, files)
    return 0


# ------------------------------------------------------------------- reward

def cmd_reward_eval(args) -> int:
    import numpy as np

    from .recording import load_recording, load_reference
    from .reward import TERMS, RewardConfig, reward_breakdown, reward_series
    from .sim.model import build_walker
    from .sim.reference import default_reference

    rec = load_recording(_require_file(args.recording))
    ref = load_reference(_require_file(args.reference)) if args.reference else default_reference(build_walker())
    cfg = RewardConfig.from_dict(_read_yaml(args.config).get("reward") if args.config else None)
    series = reward_series(rec, ref, cfg)
    summary = reward_breakdown(series, cfg)
    if args.out:
        out = _out_dir(args.out)
        per_step = out / "reward_terms.csv"
        cols = (*TERMS, "total")
        lines = ["time," + ",".join(cols)]
        for i, t in enumerate(rec.time):
            lines.append(",".join([format(t, ".10g")] + [format(series[c][i], ".10g") for c in cols]))
        per_step.write_text("\n".join(lines) + "\n", encoding="utf-8")
        js = out / "reward_summary.json"
        js.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
        write_manifest(out, "reward eval", args.argv,
                       {"recording": str(args.recording), "reference": args.reference,
                        "reward": {k: (dict(v) if isinstance(v, dict) or k == "joint_weights" else v)
                                   for k, v in cfg.__dict__.items()}}, None, [per_step, js])
    if args.format == "json":
        print(json.dumps(summary, indent=2))
        return 0
    print(f"{'term':<8} {'weight':>6} {'mean/step':>11} {'sum':>10} {'weighted':>10}")
    for term, v in summary.items():
        if v["mean"] is None:
            print(f"{term:<8} {v['weight']:>6.2f} {'n/a':>11} {'n/a':>10} {'n/a':>10}")
        else:
            print(f"{term:<8} {v['weight']:>6.2f} {v['mean']:>11.6f} {v['sum']:>10.4f} {v['weighted_sum']:>10.4f}")
    if "reward" in rec.channels:
        recorded = float(np.sum(rec["reward"]))
        print(f"recorded episode return: {recorded:.4f}")
    return 0


# ------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gaitlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"gaitlab {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="summarize a gait recording")
    a.add_argument("input", help="recording CSV or JSON")
    a.add_argument("--config", help="YAML with an 'analysis' section")
    a.add_argument("--out", help="output directory (default: <input stem>_analysis)")
    a.add_argument("--format", choices=("table", "json"), default="table")
    a.add_argument("--condition", help="override the condition label")
    a.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="run the walker under a policy and record the gait")
    s.add_argument("--alpha", type=float, default=1.0, help="right-side strength factor in (0, 1]")
    s.add_argument("--policy", default="scripted:sine", help="scripted:<name> or checkpoint:<path>")
    s.add_argument("--duration", type=float, default=20.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--exo", action="store_true", help="attach the right ankle exoskeleton")
    s.add_argument("--exo-command", type=float, default=-0.1,
                   help="scripted exo command in [-1, 0] when no learned exo actor is available")
    s.add_argument("--exo-profile", choices=("push-off", "constant"), default="push-off",
                   help="when the scripted exo command is applied")
    s.add_argument("--model-config", help="YAML walker model config")
    s.add_argument("--condition", help="condition label (default derived from alpha/exo)")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("train", help="PPO training (baseline, weakness-transfer or joint-exo)")
    t.add_argument("--stage", choices=("baseline", "weakness-transfer", "joint-exo"), default="baseline")
    t.add_argument("--preset", choices=("desk", "paper"), default="desk")
    t.add_argument("--config", help="YAML with train/reward/model sections")
    t.add_argument("--from", dest="from_checkpoint", help="baseline checkpoint (stage 2)")
    t.add_argument("--resume", help="continue from a checkpoint")
    t.add_argument("--seed", type=int)
    t.add_argument("--total-steps", type=int)
    t.add_argument("--alpha", type=float)
    t.add_argument("--learning-rate", type=float)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("report", help="combine summary.json files into one table")
    r.add_argument("summaries", nargs="+", help="summary.json files or analysis directories")
    r.add_argument("--out", help="directory for table.txt, comparison plot data and figures")
    r.add_argument("--format", choices=("table", "json"), default="table")
    r.add_argument("--no-figures", action="store_true")
    r.set_defaults(func=cmd_report)

    g = sub.add_parser("gen-fixture", help="synthetic recordings with analytic ground truth")
    g.add_argument("kind", choices=("symmetric", "table1-row", "weakness-sweep"))
    g.add_argument("--row", type=int, help="summary-table row 1..5 (table1-row)")
    g.add_argument("--si", type=float, nargs="+", help="target ankle SI sequence (weakness-sweep)")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_fixture)

    rw = sub.add_parser("reward", help="imitation reward tools")
    rsub = rw.add_subparsers(dest="reward_command", required=True)
    e = rsub.add_parser("eval", help="per-term reward breakdown of a recording against a reference")
    e.add_argument("recording")
    e.add_argument("--reference", help="reference CSV (default: bundled reference gait)")
    e.add_argument("--config", help="YAML with a 'reward' section")
    e.add_argument("--out")
    e.add_argument("--format", choices=("table", "json"), default="table")
    e.set_defaults(func=cmd_reward_eval)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    args.argv = ["gaitlab", *argv]
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        msg = str(exc) if str(exc).startswith("no such file") else f"no such file: {exc.filename}"
        print(f"error: {msg}", file=sys.stderr)
    except GaitLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        print(f"error: cannot parse config: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
