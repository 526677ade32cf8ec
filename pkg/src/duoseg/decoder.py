"""Dual-branch two-way mask decoder with high/low-resolution tokens.

One decoder (shared weights) runs twice: the HR branch attends the token
sequence against the high-resolution patch embedding, the LR branch
against the concentric low-resolution embedding. Two learnable resolution
tokens ride along with the standard output tokens; midway through the
decoder they are merged (averaging by default) and written back into both
branches so each resolution's prediction carries cross-resolution context.
Mask logits come from a per-pixel inner product between an MLP-transformed
token and per-branch mask features that fuse decoder output with early and
late encoder taps.

Token layout, fixed and relied upon throughout:
    [0]   quality token        (output token, frozen base)
    [1:4] mask tokens          (output tokens, frozen base)
    [4]   hr_token             (learnable)
    [5]   lr_token             (learnable)
    [6:]  prompt tokens
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

from .encoder import Attention, EncodedImage
from .prompts import EncodedPrompts

__all__ = [
    "AggregationMode",
    "DecodeTarget",
    "AggPlacement",
    "DecoderConfig",
    "TokenSet",
    "MaskPrediction",
    "aggregate_tokens",
    "predict_mask_from_token",
    "FusionModule",
    "MaskDecoder",
]

IOU_SLOT = 0
MASK_SLOTS = slice(1, 4)
HR_SLOT = 4
LR_SLOT = 5
PROMPT_START = 6


class AggregationMode(str, Enum):
    AVG = "avg"
    MAX = "max"
    CONCAT_FC = "concat_fc"


class DecodeTarget(str, Enum):
    """What gets merged across resolutions (ablation axis)."""

    TOKEN_AGG = "token_agg"  # merge the resolution tokens (the full model)
    FEATURE_AVG = "feature_avg"  # merge mask features instead of tokens
    HR_SELF_CONTEXT = "hr_self_context"  # fake context from the HR feature itself


class AggPlacement(str, Enum):
    AFTER_BLOCK_1 = "after_block_1"
    AFTER_BLOCK_2_PRE_HEAD = "after_block_2_pre_head"


@dataclass(frozen=True)
class DecoderConfig:
    dim: int = 64
    n_heads: int = 4
    mlp_ratio: float = 2.0
    depth: int = 2

    def __post_init__(self):
        if self.dim % 4:
            raise ValueError(f"dim must be divisible by 4 (mask-feature channels are dim/4), got {self.dim}")
        if self.dim % self.n_heads:
            raise ValueError("dim must be divisible by n_heads")


@dataclass
class TokenSet:
    """Token state snapshot in the documented concatenation order."""

    output_tokens: torch.Tensor  # (4, D)
    hr_token: torch.Tensor  # (1, D)
    lr_token: torch.Tensor  # (1, D)
    prompt_tokens: torch.Tensor  # (N, D)

    @classmethod
    def from_concat(cls, tokens: torch.Tensor) -> "TokenSet":
        return cls(
            output_tokens=tokens[:HR_SLOT],
            hr_token=tokens[HR_SLOT : HR_SLOT + 1],
            lr_token=tokens[LR_SLOT : LR_SLOT + 1],
            prompt_tokens=tokens[PROMPT_START:],
        )

    def concat(self) -> torch.Tensor:
        return torch.cat([self.output_tokens, self.hr_token, self.lr_token, self.prompt_tokens], dim=0)


@dataclass
class MaskPrediction:
    """Per-resolution logits over the respective patch extents."""

    hr_logits: torch.Tensor  # (P, P)
    lr_logits: torch.Tensor  # (P, P), covering 2x the world extent
    iou_estimate: float  # uncalibrated debug value from the quality token
    output_token_logits: torch.Tensor | None = None  # (3, P, P) debug masks

    @property
    def hr_mask(self) -> np.ndarray:
        return (self.hr_logits.detach().cpu().numpy() > 0).astype(np.uint8)

    @property
    def lr_mask(self) -> np.ndarray:
        return (self.lr_logits.detach().cpu().numpy() > 0).astype(np.uint8)


class MLP(nn.Module):
    """Stack of linears with ReLU between (none at the end)."""

    def __init__(self, in_dim: int, hidden: int, out_dim: int, n_layers: int):
        super().__init__()
        dims = [in_dim] + [hidden] * (n_layers - 1) + [out_dim]
        self.layers = nn.ModuleList(nn.Linear(a, b) for a, b in zip(dims[:-1], dims[1:]))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i + 1 < len(self.layers):
                x = F.relu(x)
        return x


def aggregate_tokens(
    t_hr: torch.Tensor,
    t_lr: torch.Tensor,
    mode: AggregationMode | str,
    concat_fc: nn.Linear | None = None,
) -> torch.Tensor:
    """Merge the two (1, D) resolution tokens into one."""
    if t_hr.shape != t_lr.shape:
        raise ValueError(f"token shapes differ: {tuple(t_hr.shape)} vs {tuple(t_lr.shape)}")
    mode = AggregationMode(mode)
    if mode is AggregationMode.AVG:
        return (t_hr + t_lr) / 2
    if mode is AggregationMode.MAX:
        return torch.maximum(t_hr, t_lr)
    if concat_fc is None:
        raise ValueError("concat_fc aggregation needs its learnable projection")
    return concat_fc(torch.cat([t_hr, t_lr], dim=-1))


def predict_mask_from_token(token: torch.Tensor, fused: torch.Tensor, mlp: nn.Module) -> torch.Tensor:
    """logits[h, w] = <mlp(token), fused[h, w, :]>."""
    w = mlp(token).reshape(-1)
    if fused.shape[-1] != w.shape[0]:
        raise ValueError(f"mlp output dim {w.shape[0]} != fused channels {fused.shape[-1]}")
    return torch.einsum("hwc,c->hw", fused, w)


class _UpscalePath(nn.Module):
    """Projection + two 2x transposed-conv upsamplings (4x total)."""

    def __init__(self, dim: int):
        super().__init__()
        self.up1 = nn.ConvTranspose2d(dim, dim // 2, kernel_size=2, stride=2)
        self.norm = nn.LayerNorm(dim // 2)
        self.up2 = nn.ConvTranspose2d(dim // 2, dim // 4, kernel_size=2, stride=2)

    def forward(self, feat: torch.Tensor) -> torch.Tensor:
        x = self.up1(feat.permute(2, 0, 1)[None])
        x = self.norm(x[0].permute(1, 2, 0))
        x = F.gelu(x)
        x = self.up2(x.permute(2, 0, 1)[None])[0].permute(1, 2, 0)
        return x


class FusionModule(nn.Module):
    """Sum of three independent upscaling paths.

    fuse(a, b, c) == path_dec(a) + path_early(b) + path_late(c) exactly;
    there is no nonlinearity after the sum, so each path's contribution is
    separable (and zeroing a path's parameters removes it entirely).
    """

    def __init__(self, dim: int):
        super().__init__()
        self.path_dec = _UpscalePath(dim)
        self.path_early = _UpscalePath(dim)
        self.path_late = _UpscalePath(dim)

    def forward(self, decoder_feat: torch.Tensor, early_feat: torch.Tensor, late_feat: torch.Tensor) -> torch.Tensor:
        if not (decoder_feat.shape[:2] == early_feat.shape[:2] == late_feat.shape[:2]):
            raise ValueError("fusion inputs must share spatial dims")
        return self.path_dec(decoder_feat) + self.path_early(early_feat) + self.path_late(late_feat)


class TwoWayBlock(nn.Module):
    """One decoder block: token self-attn, token->image, MLP, image->token."""

    def __init__(self, dim: int, n_heads: int, mlp_ratio: float, skip_first_layer_pe: bool):
        super().__init__()
        self.self_attn = Attention(dim, n_heads)
        self.norm1 = nn.LayerNorm(dim)
        self.cross_t2i = Attention(dim, n_heads)
        self.norm2 = nn.LayerNorm(dim)
        hidden = int(dim * mlp_ratio)
        self.mlp = nn.Sequential(nn.Linear(dim, hidden), nn.ReLU(), nn.Linear(hidden, dim))
        self.norm3 = nn.LayerNorm(dim)
        self.cross_i2t = Attention(dim, n_heads)
        self.norm4 = nn.LayerNorm(dim)
        self.skip_first_layer_pe = skip_first_layer_pe

    def forward(
        self,
        tokens: torch.Tensor,
        keys: torch.Tensor,
        token_pe: torch.Tensor,
        key_pe: torch.Tensor,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        if self.skip_first_layer_pe:
            tokens = self.self_attn(tokens, tokens, tokens)
        else:
            q = tokens + token_pe
            tokens = tokens + self.self_attn(q, q, tokens)
        tokens = self.norm1(tokens)

        q = tokens + token_pe
        k = keys + key_pe
        tokens = self.norm2(tokens + self.cross_t2i(q, k, keys))
        tokens = self.norm3(tokens + self.mlp(tokens))

        q = tokens + token_pe
        k = keys + key_pe
        keys = self.norm4(keys + self.cross_i2t(k, q, tokens))
        return tokens, keys


class _Branch:
    """Mutable per-resolution state while decoding."""

    def __init__(self, img: EncodedImage, dense: torch.Tensor, tokens: torch.Tensor):
        g = img.grid_size
        self.img = img
        self.tokens = tokens
        self.keys = (img.embedding + dense).reshape(g * g, -1)


class MaskDecoder(nn.Module):
    def __init__(
        self,
        cfg: DecoderConfig,
        output_size: int,
        share_head_with_output_tokens: bool = False,
    ):
        super().__init__()
        self.cfg = cfg
        self.output_size = output_size
        self.share_head_with_output_tokens = share_head_with_output_tokens
        d = cfg.dim

        self.iou_token = nn.Parameter(torch.empty(1, d))
        self.mask_tokens = nn.Parameter(torch.empty(3, d))
        self.hr_token = nn.Parameter(torch.empty(1, d))
        self.lr_token = nn.Parameter(torch.empty(1, d))
        for p in (self.iou_token, self.mask_tokens, self.hr_token, self.lr_token):
            nn.init.normal_(p, std=1.0)

        self.blocks = nn.ModuleList(
            TwoWayBlock(d, cfg.n_heads, cfg.mlp_ratio, skip_first_layer_pe=(i == 0))
            for i in range(cfg.depth)
        )
        self.final_attn = Attention(d, cfg.n_heads)
        self.norm_final = nn.LayerNorm(d)

        self.concat_fc = nn.Linear(2 * d, d)
        self.fusion = FusionModule(d)
        self.mask_head = MLP(d, d, d // 4, n_layers=3)
        self.output_mlps = nn.ModuleList(MLP(d, d, d // 4, n_layers=3) for _ in range(3))
        self.iou_head = MLP(d, d, 3, n_layers=3)

    def _resolution_head_mlp(self) -> nn.Module:
        # Alternative reading: reuse the first output token's hypernetwork
        # (frozen) instead of the dedicated new head.
        return self.output_mlps[0] if self.share_head_with_output_tokens else self.mask_head

    def forward(
        self,
        hr_img: EncodedImage,
        lr_img: EncodedImage,
        prompts: EncodedPrompts,
        mode: AggregationMode | str = AggregationMode.AVG,
        target: DecodeTarget | str = DecodeTarget.TOKEN_AGG,
        placement: AggPlacement | str = AggPlacement.AFTER_BLOCK_1,
        hook: Callable[[int, dict[str, TokenSet]], None] | None = None,
        include_debug: bool = False,
    ) -> MaskPrediction:
        mode = AggregationMode(mode)
        target = DecodeTarget(target)
        placement = AggPlacement(placement)
        d = self.cfg.dim
        if hr_img.embedding.shape != lr_img.embedding.shape:
            raise ValueError("HR and LR embeddings must share shape")
        if hr_img.embedding.shape[-1] != d or prompts.tokens.shape[-1] != d:
            raise ValueError(
                f"dim mismatch: decoder {d}, image {hr_img.embedding.shape[-1]}, prompts {prompts.tokens.shape[-1]}"
            )
        g = hr_img.grid_size

        base_tokens = torch.cat(
            [self.iou_token, self.mask_tokens, self.hr_token, self.lr_token, prompts.tokens], dim=0
        )
        key_pe = prompts.image_pe.reshape(g * g, d)
        hr = _Branch(hr_img, prompts.dense_hr, base_tokens)
        lr = _Branch(lr_img, prompts.dense_lr, base_tokens)

        if target is DecodeTarget.HR_SELF_CONTEXT:
            # Context fabricated from the HR patch itself: the LR branch
            # sees a shrunken copy of the HR features pasted into the
            # center of an empty canvas, never the true LR patch. The
            # dense prompt map is geometry only, so it stays as-is.
            lr = _Branch(_self_context_image(hr_img), prompts.dense_lr, base_tokens)

        for i, block in enumerate(self.blocks):
            for br in (hr, lr):
                br.tokens, br.keys = block(br.tokens, br.keys, base_tokens, key_pe)
            if hook is not None:
                hook(i + 1, {"hr": TokenSet.from_concat(hr.tokens), "lr": TokenSet.from_concat(lr.tokens)})
            mid_agg = (
                target is DecodeTarget.TOKEN_AGG
                and placement is AggPlacement.AFTER_BLOCK_1
                and i + 1 < len(self.blocks)
            )
            if mid_agg:
                t_mid = aggregate_tokens(
                    hr.tokens[HR_SLOT : HR_SLOT + 1], lr.tokens[LR_SLOT : LR_SLOT + 1], mode, self.concat_fc
                )
                for br in (hr, lr):
                    br.tokens = torch.cat([br.tokens[:HR_SLOT], t_mid, t_mid, br.tokens[PROMPT_START:]], dim=0)

        for br in (hr, lr):
            q = br.tokens + base_tokens
            k = br.keys + key_pe
            br.tokens = self.norm_final(br.tokens + self.final_attn(q, k, br.keys))
        if hook is not None:
            hook(len(self.blocks) + 1, {"hr": TokenSet.from_concat(hr.tokens), "lr": TokenSet.from_concat(lr.tokens)})

        fused_hr = self.fusion(hr.keys.reshape(g, g, d), hr_img.early_feat, hr_img.late_feat)
        if target is DecodeTarget.HR_SELF_CONTEXT:
            fused_lr = self.fusion(lr.keys.reshape(g, g, d), lr.img.early_feat, lr.img.late_feat)
        else:
            fused_lr = self.fusion(lr.keys.reshape(g, g, d), lr_img.early_feat, lr_img.late_feat)

        head = self._resolution_head_mlp()
        if target is DecodeTarget.TOKEN_AGG:
            t_bar = aggregate_tokens(
                hr.tokens[HR_SLOT : HR_SLOT + 1], lr.tokens[LR_SLOT : LR_SLOT + 1], mode, self.concat_fc
            )
            hr_low = predict_mask_from_token(t_bar, fused_hr, head)
            lr_low = predict_mask_from_token(t_bar, fused_lr, head)
        else:
            if target is DecodeTarget.FEATURE_AVG:
                context = _align_lr_feature(fused_lr)
            else:  # HR_SELF_CONTEXT
                context = _self_context_feature(fused_hr)
            fused_hr = (fused_hr + context) / 2
            hr_low = predict_mask_from_token(hr.tokens[HR_SLOT : HR_SLOT + 1], fused_hr, head)
            lr_low = predict_mask_from_token(lr.tokens[LR_SLOT : LR_SLOT + 1], fused_lr, head)

        hr_logits = _to_output_size(hr_low, self.output_size)
        lr_logits = _to_output_size(lr_low, self.output_size)

        iou_pred = self.iou_head(hr.tokens[IOU_SLOT : IOU_SLOT + 1]).reshape(-1)
        debug = None
        if include_debug:
            base_feat = self.fusion.path_dec(hr.keys.reshape(g, g, d))
            debug = torch.stack(
                [
                    _to_output_size(
                        predict_mask_from_token(hr.tokens[1 + k : 2 + k], base_feat, self.output_mlps[k]),
                        self.output_size,
                    )
                    for k in range(3)
                ]
            )
        return MaskPrediction(
            hr_logits=hr_logits,
            lr_logits=lr_logits,
            iou_estimate=float(iou_pred[0].detach()),
            output_token_logits=debug,
        )


def _to_output_size(logits: torch.Tensor, size: int) -> torch.Tensor:
    if logits.shape[0] == size:
        return logits
    return F.interpolate(logits[None, None], size=(size, size), mode="bilinear", align_corners=False)[0, 0]


def _avgpool2x2_t(x: torch.Tensor) -> torch.Tensor:
    h, w, c = x.shape
    return x.reshape(h // 2, 2, w // 2, 2, c).mean(dim=(1, 3))


def _center_paste(x: torch.Tensor, size: int) -> torch.Tensor:
    h, w, c = x.shape
    out = x.new_zeros(size, size, c)
    r0 = (size - h) // 2
    c0 = (size - w) // 2
    out[r0 : r0 + h, c0 : c0 + w] = x
    return out


def _upsample2x_t(x: torch.Tensor) -> torch.Tensor:
    up = F.interpolate(x.permute(2, 0, 1)[None], scale_factor=2, mode="bilinear", align_corners=False)
    return up[0].permute(1, 2, 0)


def _center_crop_t(x: torch.Tensor, size: int) -> torch.Tensor:
    h, w, _ = x.shape
    r0 = (h - size) // 2
    c0 = (w - size) // 2
    return x[r0 : r0 + size, c0 : c0 + size]


def _align_lr_feature(fused_lr: torch.Tensor) -> torch.Tensor:
    """Map an LR-extent feature onto the HR extent (central crop, 2x up)."""
    return _upsample2x_t(_center_crop_t(fused_lr, fused_lr.shape[0] // 2))


def _self_context_feature(fused_hr: torch.Tensor) -> torch.Tensor:
    """Pseudo-context built from the HR feature alone (down then up 2x)."""
    return _upsample2x_t(_avgpool2x2_t(fused_hr))


def _self_context_image(hr_img: EncodedImage) -> EncodedImage:
    def shrink(x: torch.Tensor) -> torch.Tensor:
        return _center_paste(_avgpool2x2_t(x), x.shape[0])

    return EncodedImage(
        embedding=shrink(hr_img.embedding),
        early_feat=shrink(hr_img.early_feat),
        late_feat=shrink(hr_img.late_feat),
    )
