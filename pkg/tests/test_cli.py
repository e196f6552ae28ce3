import json
import subprocess
import sys

import pytest

from compliant_aug import fixtures as fx
from compliant_aug.cli import run
from compliant_aug.dataset import load_dataset, sha256_file
from compliant_aug.model import save_clip

DATASET_FILES = ("manifest.json", "frames.jsonl", "frames.bin", "events.csv")


@pytest.fixture(scope="module")
def short_clip(tmp_path_factory, humanoid):
    path = tmp_path_factory.mktemp("clips") / "swing_3s.json"
    save_clip(fx.swing_clip(humanoid, 3.0), humanoid, path)
    return path


def model_path(data_dir):
    return str(data_dir / "humanoid.json")


def test_bounds_worked_example(capsys):
    assert run(["bounds", "--force-noise", "4", "--pos-noise", "0.01", "--force-acc", "10", "--pos-acc", "0.10"]) == 0
    assert capsys.readouterr().out.strip() == "k_min=40 k_max=1000"


def test_bounds_infeasible(capsys):
    assert run(["bounds", "--force-noise", "200", "--pos-noise", "0.01", "--force-acc", "10", "--pos-acc", "0.10"]) == 1
    err = capsys.readouterr().err
    assert "infeasible" in err


def test_usage_errors(capsys, data_dir, tmp_path):
    assert run([]) == 2
    assert run(["bounds", "--force-noise", "4"]) == 2
    assert run(["gen-data", "--model", model_path(data_dir), "--clip", "missing.json", "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "--clip" in err and "missing.json" in err
    assert run(["gen-data", "--bogus-flag"]) == 2


def test_gen_data_outputs(capsys, data_dir, short_clip, tmp_path):
    out = tmp_path / "ds"
    rc = run(["gen-data", "--model", model_path(data_dir), "--clip", str(short_clip), "--seed", "3",
              "--out", str(out), "--binary", "--set", "sampler.collision_fraction=0"])
    assert rc == 0
    for name in DATASET_FILES + ("run.json",):
        assert (out / name).exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 3 and manifest["config"]["sampler"]["collision_fraction"] == 0
    assert manifest["model_sha256"] == sha256_file(data_dir / "humanoid.json")
    run_manifest = json.loads((out / "run.json").read_text())
    assert run_manifest["seeds"] == [3] and run_manifest["inputs"][str(short_clip)] == sha256_file(short_clip)
    ds = load_dataset(out)
    assert len(ds) == 151


def test_gen_data_is_byte_identical(data_dir, short_clip, tmp_path):
    args = ["gen-data", "--model", model_path(data_dir), "--clip", str(short_clip), "--seed", "5", "--binary"]
    assert run(args + ["--out", str(tmp_path / "a")]) == 0
    assert run(args + ["--out", str(tmp_path / "b")]) == 0
    for name in DATASET_FILES:
        assert sha256_file(tmp_path / "a" / name) == sha256_file(tmp_path / "b" / name)


def test_worker_count_does_not_change_output(data_dir, short_clip, tmp_path):
    base = ["gen-data", "--model", model_path(data_dir), "--clip", str(short_clip), "--seed", "1", "--num-seeds", "2"]
    assert run(base + ["--out", str(tmp_path / "serial")]) == 0
    assert run(base + ["--out", str(tmp_path / "pool"), "--jobs", "2"]) == 0
    for seed in (1, 2):
        sub = f"swing_3s_seed{seed}"
        for name in ("manifest.json", "frames.jsonl", "events.csv"):
            assert sha256_file(tmp_path / "serial" / sub / name) == sha256_file(tmp_path / "pool" / sub / name)


def test_config_file_layering(data_dir, short_clip, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"sampler": {"seed": 11, "collision_fraction": 1.0}}))
    out = tmp_path / "ds"
    assert run(["gen-data", "--model", model_path(data_dir), "--clip", str(short_clip), "--config", str(cfg),
                "--set", "sampler.collision_fraction=0.0", "--out", str(out)]) == 0
    sampler = json.loads((out / "manifest.json").read_text())["config"]["sampler"]
    assert sampler["seed"] == 11 and sampler["collision_fraction"] == 0.0


def test_bad_config_override(capsys, data_dir, short_clip, tmp_path):
    rc = run(["gen-data", "--model", model_path(data_dir), "--clip", str(short_clip), "--set", "sampler.nope=1",
              "--out", str(tmp_path)])
    assert rc == 1 and "nope" in capsys.readouterr().err


def test_analysis_commands(capsys, data_dir, short_clip, tmp_path):
    out = tmp_path / "ds"
    assert run(["gen-data", "--model", model_path(data_dir), "--clip", str(short_clip), "--seed", "3", "--out", str(out),
                "--set", "sampler.collision_fraction=0"]) == 0
    capsys.readouterr()
    curve = tmp_path / "curve.csv"
    assert run(["analyze-stiffness", "--dataset", str(out), "--bins", "1", "--out", str(curve)]) == 0
    assert curve.read_text().startswith("bin_lo,bin_hi,commanded_k,effective_k,count\n")
    assert run(["analyze-stiffness", "--dataset", str(out), "--bins", "x,y"]) == 2
    capsys.readouterr()
    assert run(["metrics", "--model", model_path(data_dir), "--traj-a", str(out), "--traj-b", str(short_clip)]) == 0
    header, values = capsys.readouterr().out.strip().splitlines()
    assert header == "joint_error_deg,joint_error_sem,keypoint_error_cm,keypoint_error_sem"
    assert run(["metrics", "--model", model_path(data_dir), "--traj-a", str(out), "--field-a", "q_ref",
                "--traj-b", str(short_clip)]) == 0
    assert capsys.readouterr().out.strip().splitlines()[1] == "0.000000,0.000000,0.000000,0.000000"


def test_validate(capsys, data_dir, humanoid, tmp_path):
    assert run(["validate", "--model", model_path(data_dir), "--clip", str(data_dir / "standing_10s.json")]) == 0
    clip = fx.standing_clip(humanoid, 0.1)
    bad = tmp_path / "bad.json"
    save_clip(clip, humanoid, bad)
    d = json.loads(bad.read_text())
    d["rows"][0][7 + humanoid.joint_names.index("left_knee")] = 10.0
    bad.write_text(json.dumps(d))
    capsys.readouterr()
    assert run(["validate", "--model", model_path(data_dir), "--clip", str(bad)]) == 1
    assert "left_knee" in capsys.readouterr().err


def test_obs_layout(capsys, data_dir):
    assert run(["obs-layout", "--model", model_path(data_dir)]) == 0
    schema = json.loads(capsys.readouterr().out)
    assert [b["name"] for b in schema["blocks"]] == ["proprioception", "reference", "log_stiffness", "actions"]


def test_console_script_entry_point():
    r = subprocess.run([sys.executable, "-m", "compliant_aug.cli", "bounds", "--force-noise", "4", "--pos-noise",
                        "0.01", "--force-acc", "10", "--pos-acc", "0.10"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip() == "k_min=40 k_max=1000"
