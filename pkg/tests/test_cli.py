import json

import pytest

from gaitlab.cli import config_hash, main
from gaitlab.metrics import SummaryRow

TINY_TRAIN = """\
train:
  n_envs: 2
  rollout_steps: 16
  batch_size: 16
  epochs: 1
  episode_time: 2.0
"""


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_analyze_fixture(tmp_path, capsys, data_dir):
    code, out, _ = run(["analyze", data_dir / "fixture_100pct.csv", "--out", tmp_path / "a", "--no-figures"], capsys)
    assert code == 0
    assert "+6.4, 0.974" in out
    names = {p.name for p in (tmp_path / "a").iterdir()}
    assert {"summary.json", "summary.txt", "fig2_joint_angles.csv", "manifest.json"} <= names
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["command"] == "analyze" and man["argv"][0] == "gaitlab"
    assert set(man["artifacts"]) >= {"summary.json", "fig3_stance_force.csv"}
    assert man["config_hash"] == config_hash(man["config"])


def test_analyze_json_and_config(tmp_path, capsys, data_dir):
    code, out, _ = run(["analyze", data_dir / "fixture_50pct.csv", "--config", data_dir / "analysis.yaml",
                        "--out", tmp_path / "a", "--format", "json", "--no-figures"], capsys)
    assert code == 0
    row = SummaryRow.from_dict(json.loads(out))
    assert round(row.joints["ankle"].si, 1) == -25.8


def test_analyze_is_idempotent(tmp_path, capsys, data_dir):
    for d in ("x", "y"):
        assert run(["analyze", data_dir / "fixture_25pct.csv", "--out", tmp_path / d], capsys)[0] == 0
    mx = json.loads((tmp_path / "x" / "manifest.json").read_text())
    my = json.loads((tmp_path / "y" / "manifest.json").read_text())
    assert mx["artifacts"] == my["artifacts"]
    assert "fig2_joint_angles.png" in mx["artifacts"]


def test_error_exit_codes(tmp_path, capsys, data_dir):
    code, _, err = run(["analyze", tmp_path / "missing.csv"], capsys)
    assert code == 1 and "no such file" in err
    code, _, err = run(["simulate", "--alpha", "0", "--out", tmp_path / "s"], capsys)
    assert code == 1 and "AlphaOutOfRange" in err
    code, _, err = run(["gen-fixture", "table1-row", "--row", "9", "--out", tmp_path / "g"], capsys)
    assert code == 1
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("analysis: [unclosed\n")
    code, _, err = run(["analyze", data_dir / "fixture_100pct.csv",
                        "--config", bad, "--out", tmp_path / "b"], capsys)
    assert code == 1 and "cannot parse" in err


def test_gen_fixture_and_report(tmp_path, capsys):
    assert run(["gen-fixture", "table1-row", "--row", "3", "--out", tmp_path / "fx"], capsys)[0] == 0
    assert (tmp_path / "fx" / "fixture_50pct.truth.json").exists()
    assert run(["gen-fixture", "weakness-sweep", "--out", tmp_path / "sw"], capsys)[0] == 0
    assert len(list((tmp_path / "sw").glob("fixture_sweep_*.csv"))) == 4
    dirs = []
    for k in (1, 2):
        d = tmp_path / f"an{k}"
        run(["analyze", tmp_path / "sw" / f"fixture_sweep_{k}.csv", "--out", d, "--no-figures"], capsys)
        dirs.append(d)
    code, out, _ = run(["report", *dirs, "--out", tmp_path / "rep"], capsys)
    assert code == 0 and "Ankle (SI, r)" in out
    names = {p.name for p in (tmp_path / "rep").iterdir()}
    assert {"table.txt", "table.json", "fig4_comparison.csv", "fig4_comparison.png", "manifest.json"} <= names


def test_simulate_is_deterministic(tmp_path, capsys):
    for d in ("a", "b"):
        code, out, _ = run(["simulate", "--duration", "1.5", "--seed", "7", "--out", tmp_path / d], capsys)
        assert code == 0 and "45 samples" in out
    assert (tmp_path / "a" / "recording.csv").read_bytes() == (tmp_path / "b" / "recording.csv").read_bytes()


def test_simulate_exo_profiles(tmp_path, capsys):
    for profile in ("push-off", "constant"):
        code, _, _ = run(["simulate", "--exo", "--exo-profile", profile, "--exo-command", "-0.2",
                          "--duration", "1.0", "--out", tmp_path / profile], capsys)
        assert code == 0
        man = json.loads((tmp_path / profile / "manifest.json").read_text())
        assert man["config"]["exo_profile"] == profile


def test_reward_eval(tmp_path, capsys):
    run(["simulate", "--duration", "1.0", "--out", tmp_path / "s"], capsys)
    code, out, _ = run(["reward", "eval", tmp_path / "s" / "recording.csv", "--out", tmp_path / "r"], capsys)
    assert code == 0 and "recorded episode return" in out
    summary = json.loads((tmp_path / "r" / "reward_summary.json").read_text())
    assert set(summary) == {"qpos", "qvel", "ee", "delta_a", "total"}


def test_train_then_simulate_checkpoint(tmp_path, capsys):
    cfg = tmp_path / "tiny.yaml"
    cfg.write_text(TINY_TRAIN)
    code, out, _ = run(["train", "--config", cfg, "--total-steps", "64", "--out", tmp_path / "t"], capsys)
    assert code == 0 and "checkpoint" in out
    ckpt = tmp_path / "t" / "checkpoint_final.pt"
    assert (tmp_path / "t" / "progress.csv").exists()
    code, _, err = run(["train", "--stage", "joint-exo", "--config", cfg, "--total-steps", "32",
                        "--out", tmp_path / "t2"], capsys)
    assert code == 1 and "--from" in err
    code, _, _ = run(["train", "--stage", "joint-exo", "--config", cfg, "--total-steps", "32",
                      "--from", ckpt, "--out", tmp_path / "t2"], capsys)
    assert code == 0
    code, _, _ = run(["simulate", "--policy", f"checkpoint:{tmp_path / 't2' / 'checkpoint_final.pt'}", "--alpha",
                      "0.5", "--exo", "--duration", "0.5", "--out", tmp_path / "s"], capsys)
    assert code == 0
    code, _, _ = run(["train", "--resume", ckpt, "--total-steps", "96", "--out", tmp_path / "t3"], capsys)
    assert code == 0
