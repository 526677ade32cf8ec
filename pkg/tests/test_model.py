import json
import zipfile

import numpy as np
import pytest
import torch

from duoseg.model import ModelConfig, build_model, load_checkpoint, params_digest, save_checkpoint
from duoseg.prompts import PointPrompt


class TestCheckpoint:
    def test_round_trip_identical_params(self, tiny_model, tmp_path):
        path = tmp_path / "model.ckpt"
        save_checkpoint(tiny_model, path)
        loaded = load_checkpoint(path)
        assert loaded.cfg == tiny_model.cfg
        assert params_digest(dict(loaded.named_parameters())) == params_digest(
            dict(tiny_model.named_parameters())
        )

    def test_round_trip_identical_predictions(self, tiny_model, small_pairs, tmp_path):
        path = tmp_path / "model.ckpt"
        save_checkpoint(tiny_model, path)
        loaded = load_checkpoint(path)
        pts = PointPrompt(((20, 20),), (1,))
        a = tiny_model.predict(small_pairs[0], points=pts)
        b = loaded.predict(small_pairs[0], points=pts)
        assert torch.equal(a.hr_logits, b.hr_logits)

    def test_archive_is_inspectable(self, tiny_model, tmp_path):
        path = tmp_path / "model.ckpt"
        save_checkpoint(tiny_model, path)
        with zipfile.ZipFile(path) as zf:
            header = json.loads(zf.read("config.json"))
            assert header["format_version"] == 1
            assert header["model_config"]["dim"] == 32
            names = zf.namelist()
            assert "params/decoder.hr_token.npy" in names

    def test_unknown_version_rejected(self, tiny_model, tmp_path):
        path = tmp_path / "model.ckpt"
        save_checkpoint(tiny_model, path)
        bad = tmp_path / "bad.ckpt"
        with zipfile.ZipFile(path) as zin, zipfile.ZipFile(bad, "w") as zout:
            for item in zin.namelist():
                data = zin.read(item)
                if item == "config.json":
                    hdr = json.loads(data)
                    hdr["format_version"] = 99
                    data = json.dumps(hdr).encode()
                zout.writestr(item, data)
        with pytest.raises(ValueError, match="unsupported"):
            load_checkpoint(bad)

    def test_seeded_build_is_reproducible(self):
        cfg = ModelConfig(patch_size=32, dim=16, encoder_depth=2, encoder_patch_px=4, encoder_heads=2, decoder_heads=2, seed=5)
        a = build_model(cfg)
        b = build_model(cfg)
        assert params_digest(dict(a.named_parameters())) == params_digest(dict(b.named_parameters()))

    def test_mismatched_patch_rejected_at_forward(self, tiny_model, small_dataset):
        from duoseg.pyramid import extract_pair

        pair = extract_pair(small_dataset[0], (128, 128), 0, 32)
        with pytest.raises(ValueError, match="patch_size"):
            tiny_model(pair, tiny_model.encode_prompts(points=PointPrompt(((1, 1),), (1,))))


class TestParamsDigest:
    def test_order_independent(self):
        a = {"x": torch.ones(3), "y": torch.zeros(2)}
        b = {"y": torch.zeros(2), "x": torch.ones(3)}
        assert params_digest(a) == params_digest(b)

    def test_sensitive_to_values(self):
        a = {"x": torch.ones(3, dtype=torch.float64)}
        b = {"x": torch.ones(3, dtype=torch.float64) + 1e-12}
        assert params_digest(a) != params_digest(b)
