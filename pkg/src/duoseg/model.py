"""Full model: shared image encoder, prompt encoder, dual-branch decoder.

Checkpoints are plain zip archives: a ``config.json`` header (versioned)
plus one ``params/<state_dict_key>.npy`` entry per tensor, so they can be
inspected or diffed without torch.
"""

from __future__ import annotations

import hashlib
import io
import json
import zipfile
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .encoder import EncoderConfig, ImageEncoder
from .prompts import PromptEncoder, BoxPrompt, PointPrompt, CoarseMask, EncodedPrompts
from .decoder import (
    AggregationMode,
    AggPlacement,
    DecodeTarget,
    DecoderConfig,
    MaskDecoder,
    MaskPrediction,
)
from .pyramid import PatchPair

__all__ = ["ModelConfig", "DuoSegModel", "build_model", "save_checkpoint", "load_checkpoint", "params_digest"]

CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    patch_size: int = 128
    dim: int = 64
    in_channels: int = 1
    encoder_depth: int = 4
    encoder_heads: int = 4
    encoder_patch_px: int = 8
    encoder_early_tap: int = 1
    encoder_mlp_ratio: float = 4.0
    decoder_heads: int = 4
    decoder_mlp_ratio: float = 2.0
    aggregation_mode: str = "avg"
    target: str = "token_agg"
    agg_placement: str = "after_block_1"
    share_head_with_output_tokens: bool = False
    seed: int = 0

    def __post_init__(self):
        AggregationMode(self.aggregation_mode)
        DecodeTarget(self.target)
        AggPlacement(self.agg_placement)
        if self.patch_size % 4:
            raise ValueError("patch_size must be a multiple of 4")

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(
            patch_size_px=self.encoder_patch_px,
            depth=self.encoder_depth,
            dim=self.dim,
            n_heads=self.encoder_heads,
            early_tap=self.encoder_early_tap,
            mlp_ratio=self.encoder_mlp_ratio,
            in_channels=self.in_channels,
        )

    def decoder_config(self) -> DecoderConfig:
        return DecoderConfig(dim=self.dim, n_heads=self.decoder_heads, mlp_ratio=self.decoder_mlp_ratio)


class DuoSegModel(nn.Module):
    """End-to-end dual-resolution promptable segmenter (float64 throughout)."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.image_encoder = ImageEncoder(cfg.encoder_config(), cfg.patch_size)
        self.prompt_encoder = PromptEncoder(
            dim=cfg.dim, patch_size=cfg.patch_size, grid_size=cfg.patch_size // cfg.encoder_patch_px
        )
        self.decoder = MaskDecoder(
            cfg.decoder_config(),
            output_size=cfg.patch_size,
            share_head_with_output_tokens=cfg.share_head_with_output_tokens,
        )
        self.double()

    def encode_patch(self, patch: np.ndarray | torch.Tensor):
        t = torch.as_tensor(np.asarray(patch), dtype=torch.float64)
        return self.image_encoder(t)

    def encode_prompts(
        self,
        points: PointPrompt | None = None,
        box: BoxPrompt | None = None,
        coarse: CoarseMask | None = None,
    ) -> EncodedPrompts:
        return self.prompt_encoder(points=points, box=box, coarse=coarse)

    def forward(self, pair: PatchPair, prompts: EncodedPrompts, hook=None, include_debug: bool = False) -> MaskPrediction:
        if pair.patch_size != self.cfg.patch_size:
            raise ValueError(f"pair patch_size {pair.patch_size} != model patch_size {self.cfg.patch_size}")
        hr = self.encode_patch(pair.hr_patch)
        lr = self.encode_patch(pair.lr_patch)
        return self.decoder(
            hr,
            lr,
            prompts,
            mode=self.cfg.aggregation_mode,
            target=self.cfg.target,
            placement=self.cfg.agg_placement,
            hook=hook,
            include_debug=include_debug,
        )

    def predict(
        self,
        pair: PatchPair,
        points: PointPrompt | None = None,
        box: BoxPrompt | None = None,
        coarse: CoarseMask | None = None,
    ) -> MaskPrediction:
        with torch.no_grad():
            return self.forward(pair, self.encode_prompts(points=points, box=box, coarse=coarse))


def build_model(cfg: ModelConfig) -> DuoSegModel:
    """Construct a model with parameters drawn deterministically from cfg.seed."""
    torch.manual_seed(cfg.seed)
    return DuoSegModel(cfg)


def save_checkpoint(model: DuoSegModel, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {"format_version": CHECKPOINT_FORMAT_VERSION, "model_config": asdict(model.cfg)}
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("config.json", json.dumps(header, indent=2))
        for name, tensor in model.state_dict().items():
            buf = io.BytesIO()
            np.save(buf, tensor.detach().cpu().numpy())
            zf.writestr(f"params/{name}.npy", buf.getvalue())


def load_checkpoint(path: str | Path) -> DuoSegModel:
    path = Path(path)
    with zipfile.ZipFile(path) as zf:
        header = json.loads(zf.read("config.json"))
        if header.get("format_version") != CHECKPOINT_FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint format: {header.get('format_version')}")
        cfg = ModelConfig(**header["model_config"])
        model = build_model(cfg)
        state = {}
        for name in model.state_dict():
            arr = np.load(io.BytesIO(zf.read(f"params/{name}.npy")))
            state[name] = torch.as_tensor(arr)
        model.load_state_dict(state, strict=True)
    return model


def params_digest(tensors: dict[str, torch.Tensor]) -> str:
    """Order-independent sha256 digest of named tensors."""
    h = hashlib.sha256()
    for name in sorted(tensors):
        h.update(name.encode())
        h.update(tensors[name].detach().cpu().numpy().tobytes())
    return h.hexdigest()
