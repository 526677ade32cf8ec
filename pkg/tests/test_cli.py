import json

import pytest

from duoseg.cli import main
from duoseg.evaluation import EvalReport


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """synth -> train once; downstream commands reuse the artifacts."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    cfg = root / "synth.json"
    cfg.write_text(json.dumps({"n_images": 2, "image_size": 128, "n_objects": 1, "n_levels": 3}))
    assert main(["synth", "--config", str(cfg), "--out", str(data), "--seed", "13"]) == 0

    train_cfg = root / "train.yaml"
    train_cfg.write_text(
        "model:\n"
        "  patch_size: 32\n"
        "  dim: 16\n"
        "  encoder_depth: 2\n"
        "  encoder_patch_px: 4\n"
        "  encoder_heads: 2\n"
        "  decoder_heads: 2\n"
        "train:\n"
        "  steps: 5\n"
        "  seed: 1\n"
        "loss:\n"
        "  hr_weight: 0.5\n"
    )
    ckpt = root / "model.ckpt"
    curve = root / "curve.csv"
    assert main([
        "train", "--data", str(data), "--config", str(train_cfg), "--out", str(ckpt), "--curve", str(curve)
    ]) == 0
    return {"root": root, "data": data, "ckpt": ckpt, "curve": curve, "train_cfg": train_cfg}


def test_synth_writes_sidecars(workspace):
    dirs = [p for p in workspace["data"].iterdir() if p.is_dir()]
    assert len(dirs) == 2
    meta = json.loads((dirs[0] / "meta.json").read_text())
    assert meta["n_levels"] == 3
    assert (dirs[0] / "level_0.npy").exists()
    assert (dirs[0] / "gt_2.png").exists()


def test_train_emits_curve(workspace):
    lines = workspace["curve"].read_text().strip().splitlines()
    assert lines[0] == "step,loss,loss_high,loss_low"
    assert len(lines) == 6


def test_eval_writes_report(workspace, tmp_path):
    out = tmp_path / "report.json"
    assert main([
        "eval", "--ckpt", str(workspace["ckpt"]), "--data", str(workspace["data"]),
        "--protocol", "points:2", "--seed", "3", "--out", str(out), "--pairs-per-image", "1",
    ]) == 0
    report = EvalReport.from_json(out.read_text())
    assert report.prompt_protocol == "points(k=2)"
    assert 0.0 <= report.mean_dice <= 1.0


def test_ablate_grid_layout(workspace, tmp_path):
    out = tmp_path / "grid.csv"
    assert main([
        "ablate", "--data", str(workspace["data"]), "--config", str(workspace["train_cfg"]),
        "--axes", "hr_weight=0.25,0.5,0.75", "--steps", "2", "--out", str(out), "--pairs-per-image", "1",
    ]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "axis,value,mean_dice,status"
    assert [l.split(",")[1] for l in lines[1:]] == ["0.25", "0.5", "0.75"]


def test_sweep_outputs_curve(workspace, tmp_path):
    out = tmp_path / "sweep.json"
    assert main([
        "sweep", "--ckpt", str(workspace["ckpt"]), "--data", str(workspace["data"]),
        "--ks", "1,2", "--out", str(out), "--pairs-per-image", "1",
    ]) == 0
    curve = json.loads(out.read_text())["curve"]
    assert [k for k, _ in curve] == [1, 2]
