import json
from pathlib import Path

import numpy as np
import pytest

from blapose.cli import main


def write_config(path: Path, out_dir: Path, **overrides) -> Path:
    cfg = {
        "seed": 3,
        "paths": {
            "bank": str(out_dir / "bank.csv"),
            "corpus_dir": str(out_dir),
            "checkpoint": str(out_dir / "model.ckpt"),
            "lifter": str(out_dir / "lifter.bundle"),
            "output_dir": str(out_dir),
        },
        "corpus": {
            "train_sequences": 6,
            "test_sequences": 2,
            "frames": 48,
            "actions": [["Still", 0.0], ["Sway", 0.01]],
        },
        "bank_gen": {"samples": 40},
        "augmentation": {"strategy": "synthetic", "shift_sigma": 0.05, "replicas": 1},
        "train": {
            "sequence_length": 24,
            "batch_size": 8,
            "lr": 0.002,
            "epochs": 2,
            "c": 8,
            "c_prime": 8,
        },
        "finetune": {"lr": 0.0005, "epochs": 1, "window": 1},
        "bench": {"repetitions": 50},
    }
    for key, value in overrides.items():
        if isinstance(value, dict):
            cfg.setdefault(key, {}).update(value)
        else:
            cfg[key] = value
    path.write_text(json.dumps(cfg, indent=2))
    return path


@pytest.fixture()
def workspace(tmp_path):
    out = tmp_path / "run"
    out.mkdir()
    cfg_path = write_config(tmp_path / "cfg.json", out)
    return cfg_path, out


def run(argv, capsys=None):
    code = main(argv)
    if capsys is not None:
        return code, capsys.readouterr().out
    return code


class TestPipeline:
    def test_full_pipeline(self, workspace, capsys):
        cfg, out = workspace
        assert run(["gen-lengths", "--config", str(cfg)]) == 0
        assert (out / "bank.csv").exists()
        assert run(["gen-corpus", "--config", str(cfg)]) == 0
        assert (out / "train.bundle").exists() and (out / "test.bundle").exists()
        code, stdout = run(["train", "--config", str(cfg), "--json"], capsys)
        assert code == 0
        summary = json.loads(stdout)
        assert Path(summary["checkpoint"]).exists()
        assert summary["final_train_loss"] > 0

        assert run(["predict-lengths", "--config", str(cfg)]) == 0
        assert (out / "lengths.bundle").exists()

        assert run(["lift-toy", "--config", str(cfg), "--mode", "train"]) == 0
        assert run(["lift-toy", "--config", str(cfg), "--mode", "apply"]) == 0
        assert (out / "lifted_poses.bundle").exists()

        assert run([
            "adjust", "--config", str(cfg),
            "--poses", str(out / "lifted_poses.bundle"),
            "--lengths", str(out / "lengths.bundle"),
        ]) == 0
        assert (out / "adjusted_poses.bundle").exists()

        code, stdout = run([
            "eval", "--config", str(cfg),
            "--pred", str(out / "adjusted_poses.bundle"), "--json",
        ], capsys)
        assert code == 0
        summary = json.loads(stdout)
        assert set(summary) >= {"mpjpe_mm", "p_mpjpe_mm", "bone_len_err_mm"}
        assert (out / "report.csv").exists()
        assert (out / "report.md").exists()

        assert run(["finetune", "--config", str(cfg)]) == 0
        assert (out / "lifter_finetuned.bundle").exists()

        assert run([
            "report", "--config", str(cfg),
            "--eval-json", str(out / "report.json"),
            "--train-log", str(out / "train_log.json"),
            "--bank", str(out / "bank.csv"),
        ]) == 0
        assert (out / "training_curve.svg").exists()
        assert (out / "bone_stats.svg").exists()
        assert (out / "per_action_mpjpe.svg").exists()

    def test_eval_of_truth_is_zero(self, workspace, capsys):
        cfg, out = workspace
        assert run(["gen-lengths", "--config", str(cfg)]) == 0
        assert run(["gen-corpus", "--config", str(cfg)]) == 0
        # build a pose-set that equals the stored groundtruth
        from blapose.bundle import read_bundle, write_bundle
        from blapose.corpus import load_split

        seqs = load_split(out / "test.bundle")
        arrays = [(f"{s.name}.poses3d", s.poses) for s in seqs]
        meta = {
            "kind": "pose-set",
            "sequences": [{"name": s.name, "action": s.action} for s in seqs],
        }
        write_bundle(out / "truth_as_pred.bundle", arrays, meta)
        code, stdout = run([
            "eval", "--config", str(cfg), "--pred", str(out / "truth_as_pred.bundle"),
            "--json",
        ], capsys)
        assert code == 0
        summary = json.loads(stdout)
        assert summary["mpjpe_mm"] < 1e-9
        assert summary["bone_len_err_mm"] < 1e-9


class TestCliContract:
    def test_unknown_flag_exits_1(self, workspace):
        cfg, _ = workspace
        assert run(["gen-corpus", "--config", str(cfg), "--bogus"]) == 1

    def test_unknown_command_exits_1(self):
        assert run(["frobnicate"]) == 1

    def test_missing_input_exits_1(self, workspace):
        cfg, _ = workspace
        # corpus not generated yet
        assert run(["train", "--config", str(cfg)]) == 1

    def test_bad_config_schema_exits_1(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"unknown_section": 1}))
        assert run(["gen-corpus", "--config", str(bad)]) == 1

    def test_bench_zero_reps(self, workspace, capsys):
        cfg, out = workspace
        assert run(["gen-lengths", "--config", str(cfg)]) == 0
        assert run(["gen-corpus", "--config", str(cfg)]) == 0
        # bench needs a unidirectional checkpoint
        cfg2 = write_config(cfg.parent / "cfg2.json", out, train={
            "sequence_length": 24, "batch_size": 8, "lr": 0.002, "epochs": 1,
            "c": 8, "c_prime": 8, "bidirectional": False,
        })
        assert run(["train", "--config", str(cfg2)]) == 0
        code, stdout = run(["bench", "--config", str(cfg2), "--reps", "0", "--json"], capsys)
        assert code == 0
        assert json.loads(stdout)["repetitions"] == 0


class TestDeterminism:
    def test_rerun_byte_identical(self, tmp_path):
        """Identical config + seed: byte-identical bundles and reports."""
        outputs = {}
        for run_id in ("a", "b"):
            out = tmp_path / run_id
            out.mkdir()
            cfg = write_config(tmp_path / f"cfg_{run_id}.json", out)
            for argv in (
                ["gen-lengths", "--config", str(cfg)],
                ["gen-corpus", "--config", str(cfg)],
                ["train", "--config", str(cfg)],
                ["predict-lengths", "--config", str(cfg)],
                ["lift-toy", "--config", str(cfg), "--mode", "train"],
                ["lift-toy", "--config", str(cfg), "--mode", "apply"],
                ["adjust", "--config", str(cfg),
                 "--poses", str(out / "lifted_poses.bundle"),
                 "--lengths", str(out / "lengths.bundle")],
                ["eval", "--config", str(cfg), "--pred", str(out / "adjusted_poses.bundle")],
                ["report", "--config", str(cfg), "--eval-json", str(out / "report.json"),
                 "--train-log", str(out / "train_log.json"), "--bank", str(out / "bank.csv")],
            ):
                assert main(argv) == 0
            outputs[run_id] = {
                p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.is_file()
            }
        names_a = set(outputs["a"])
        assert names_a == set(outputs["b"])
        for name in names_a:
            assert outputs["a"][name] == outputs["b"][name], f"{name} differs between reruns"
