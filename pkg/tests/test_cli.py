import json

import numpy as np
import pytest

from app.cli import run
from app.errors import EXIT_CONFIG, EXIT_RUNTIME, EXIT_USAGE
from app.features import read_features


def test_flops_report_and_json(tmp_path, capsys):
    path = tmp_path / "sm.json"
    assert run(["flops", "--preset", "squeezeformer-sm", "--json", str(path)]) == 0
    out = capsys.readouterr().out
    assert "gflops" in out
    report = json.loads(path.read_text(encoding="utf-8"))
    assert report["frames"]["input"] == 3000
    assert report["total_flops"] / 1e9 == pytest.approx(42.7, rel=0.2)
    assert report["config"]["unet"] is True


def test_flops_breakdown_lists_entries(capsys):
    assert run(["flops", "--preset", "toy", "--seconds", "1", "--breakdown"]) == 0
    out = capsys.readouterr().out
    assert "subsampling" in out and "head" in out


@pytest.mark.parametrize("argv", [
    ["flops", "--seconds", "0"],
    ["flops", "--no-such-flag"],
    ["ablation", "--size", "xl"],
    ["profile", "--frames", "-1"],
    ["profile", "--inputs", "0"],
    ["gradcheck", "--frames", "abc"],
    [],
])
def test_usage_errors(argv):
    assert run(argv) == EXIT_USAGE


def test_help_exits_cleanly(capsys):
    assert run(["--help"]) == 0
    assert "flops" in capsys.readouterr().out


def test_unknown_preset_is_a_config_error():
    assert run(["params", "--preset", "squeezeformer-xxl"]) == EXIT_CONFIG


def test_ablation_json(tmp_path, capsys):
    path = tmp_path / "ladder.json"
    assert run(["ablation", "--size", "m", "--json", str(path)]) == 0
    rows = json.loads(path.read_text(encoding="utf-8"))
    assert len(rows) == 6
    assert rows[0]["design_change"] == "baseline"
    assert rows[-1]["gflops"] < rows[0]["gflops"]
    assert "design change" in capsys.readouterr().out


def test_ablation_skip_variant_row(tmp_path, capsys):
    path = tmp_path / "ladder.json"
    assert run(["ablation", "--size", "m", "--skip-variant", "--json", str(path)]) == 0
    rows = json.loads(path.read_text(encoding="utf-8"))
    assert len(rows) == 7
    assert rows[-1]["config"]["unet_skip"] is False
    assert "- U-Net skip" in capsys.readouterr().out


def test_same_seed_gives_identical_files(tmp_path, capsys):
    outputs = []
    for run_id in range(2):
        features = tmp_path / f"example{run_id}.bin"
        profile = tmp_path / f"profile{run_id}.json"
        assert run(["synth", "--output", str(features), "--seed", "4"]) == 0
        assert run([
            "profile", "--preset", "toy", "--frames", "40", "--inputs", "2", "--seed", "4", "--json", str(profile),
        ]) == 0
        outputs.append((features.read_bytes(), profile.read_bytes()))
    assert outputs[0] == outputs[1]


def test_params_total(capsys):
    assert run(["params", "--preset", "toy"]) == 0
    assert "total 3453" in capsys.readouterr().out


def test_config_prints_expanded_preset(capsys):
    assert run(["config", "--preset", "squeezeformer-xs"]) == 0
    out = capsys.readouterr().out
    assert "num_blocks: 16" in out
    assert "downsample_after_block: 7" in out


def test_bad_config_file(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("model:\n  preset: toy\n  heads: 3\n", encoding="utf-8")
    assert run(["config", "--config", str(path)]) == EXIT_CONFIG
    path.write_text("model: {preset: toy}\nunknown_section: 1\n", encoding="utf-8")
    assert run(["flops", "--config", str(path)]) == EXIT_CONFIG


def test_gradcheck_with_dropout_config(tmp_path, capsys):
    path = tmp_path / "dropout.yaml"
    path.write_text("model:\n  preset: toy\n  dropout: 0.1\n  attention_dropout: 0.1\n", encoding="utf-8")
    assert run(["gradcheck", "--config", str(path), "--frames", "12"]) == 0
    assert "checked" in capsys.readouterr().out


def test_schedule_rows(tmp_path):
    path = tmp_path / "lr.csv"
    assert run(["schedule", "--steps", "20", "--every", "10", "--warmup", "10", "--output", str(path)]) == 0
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "step,lr"
    values = {int(t): float(v) for t, v in (line.split(",") for line in lines[1:])}
    assert values[0] == 0.0
    assert values[10] == pytest.approx(2e-3)
    assert values[20] == pytest.approx(1e-3)


def test_schedule_recipe_needs_steps_per_epoch():
    assert run(["schedule", "--size", "m"]) == EXIT_USAGE
    assert run(["schedule", "--size", "m", "--steps-per-epoch", "10", "--steps", "100"]) == 0


def test_checkpoint_every_needs_directory():
    assert run(["train", "--steps", "1", "--checkpoint-every", "1"]) == EXIT_USAGE


def test_synth_train_decode_profile(tmp_path, capsys):
    features = tmp_path / "example.bin"
    assert run(["synth", "--output", str(features), "--seed", "3", "--length", "5"]) == 0
    labels = capsys.readouterr().out.split()
    assert len(labels) == 5
    assert read_features(str(features)).shape == (20, 16)

    checkpoint = tmp_path / "tiny.ckpt"
    log = tmp_path / "train.jsonl"
    assert run([
        "train", "--steps", "2", "--batch-size", "1", "--eval-every", "1",
        "--checkpoint", str(checkpoint), "--log", str(log),
    ]) == 0
    assert capsys.readouterr().out.startswith("step 2: loss ")
    assert len(log.read_text(encoding="utf-8").splitlines()) == 2

    assert run(["decode", "--checkpoint", str(checkpoint), "--input", str(features)]) == 0
    tokens = capsys.readouterr().out.split()
    assert all(0 <= int(t) < 8 for t in tokens)

    profile = tmp_path / "profile.json"
    assert run([
        "profile", "--checkpoint", str(checkpoint), "--inputs", "2", "--frames", "64",
        "--json", str(profile),
    ]) == 0
    data = json.loads(profile.read_text(encoding="utf-8"))
    assert data["distances"] == [1, 2, 3, 4]
    assert set(data["similarities"]) == {"input", "block1", "block2"}


def test_decode_missing_files(tmp_path):
    assert run(["decode", "--checkpoint", str(tmp_path / "none.ckpt"), "--input", "x.bin"]) == EXIT_RUNTIME


def test_gradcheck_toy(capsys):
    assert run(["gradcheck", "--frames", "8", "--max-coords", "2"]) == 0
    assert capsys.readouterr().out.startswith("checked ")


def test_profile_fresh_model(capsys):
    assert run(["profile", "--preset", "toy", "--inputs", "1", "--frames", "48", "--distances", "1,2"]) == 0
    rows = [line for line in capsys.readouterr().out.splitlines() if line.startswith("block")]
    assert rows
    assert np.all(np.abs([float(r.split()[-1]) for r in rows if r.split()[-1] != "nan"]) <= 1.0)
