"""Small from-scratch ViT image encoder.

Produces the final image embedding plus two intermediate taps (an early
and a late block output) that the decoder's fusion module consumes. The
forward pass has no stochastic ops: identical inputs give identical
outputs bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn

__all__ = ["EncoderConfig", "EncodedImage", "Attention", "TransformerBlock", "ImageEncoder"]


@dataclass(frozen=True)
class EncoderConfig:
    patch_size_px: int = 8
    depth: int = 4
    dim: int = 64
    n_heads: int = 4
    early_tap: int = 1  # number of blocks applied before the early tap
    mlp_ratio: float = 4.0
    in_channels: int = 1

    def __post_init__(self):
        if not 0 <= self.early_tap < self.depth:
            raise ValueError(f"early_tap {self.early_tap} must lie in [0, depth={self.depth})")
        if self.dim % self.n_heads:
            raise ValueError(f"dim {self.dim} must be divisible by n_heads {self.n_heads}")
        if self.patch_size_px & (self.patch_size_px - 1):
            raise ValueError(f"patch_size_px must be a power of two, got {self.patch_size_px}")


@dataclass
class EncodedImage:
    """Channels-last (H', W', C) feature triple for one patch."""

    embedding: torch.Tensor
    early_feat: torch.Tensor
    late_feat: torch.Tensor

    @property
    def grid_size(self) -> int:
        return self.embedding.shape[0]


class Attention(nn.Module):
    """Multi-head self/cross attention over unbatched (T, D) sequences."""

    def __init__(self, dim: int, n_heads: int):
        super().__init__()
        if dim % n_heads:
            raise ValueError("dim must divide evenly into heads")
        self.n_heads = n_heads
        self.head_dim = dim // n_heads
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.out_proj = nn.Linear(dim, dim)

    def forward(self, q: torch.Tensor, k: torch.Tensor, v: torch.Tensor) -> torch.Tensor:
        tq, tk = q.shape[0], k.shape[0]
        qh = self.q_proj(q).reshape(tq, self.n_heads, self.head_dim).transpose(0, 1)
        kh = self.k_proj(k).reshape(tk, self.n_heads, self.head_dim).transpose(0, 1)
        vh = self.v_proj(v).reshape(tk, self.n_heads, self.head_dim).transpose(0, 1)
        scores = qh @ kh.transpose(-2, -1) / math.sqrt(self.head_dim)
        attn = torch.softmax(scores, dim=-1)
        out = (attn @ vh).transpose(0, 1).reshape(tq, -1)
        return self.out_proj(out)


class TransformerBlock(nn.Module):
    """Pre-norm ViT block: x + attn(ln(x)), then x + mlp(ln(x))."""

    def __init__(self, dim: int, n_heads: int, mlp_ratio: float):
        super().__init__()
        hidden = int(dim * mlp_ratio)
        self.ln1 = nn.LayerNorm(dim)
        self.attn = Attention(dim, n_heads)
        self.ln2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(nn.Linear(dim, hidden), nn.GELU(), nn.Linear(hidden, dim))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = self.ln1(x)
        x = x + self.attn(y, y, y)
        x = x + self.mlp(self.ln2(x))
        return x


class ImageEncoder(nn.Module):
    """Plain ViT over a fixed patch size, exposing early/late feature taps."""

    def __init__(self, cfg: EncoderConfig, patch_size: int):
        super().__init__()
        if patch_size % cfg.patch_size_px:
            raise ValueError(f"patch_size {patch_size} must be divisible by patch_size_px {cfg.patch_size_px}")
        self.cfg = cfg
        self.patch_size = patch_size
        self.grid_size = patch_size // cfg.patch_size_px
        self.patch_embed = nn.Conv2d(cfg.in_channels, cfg.dim, kernel_size=cfg.patch_size_px, stride=cfg.patch_size_px)
        # normalize cell content to unit scale, then add full-scale
        # positional codes: this encoder stays frozen at its random init, so
        # content and position must BOTH be separable downstream, at
        # comparable magnitudes (cf. sinusoidal embeddings at O(1))
        self.embed_norm = nn.LayerNorm(cfg.dim)
        self.pos_embed = nn.Parameter(torch.randn(self.grid_size, self.grid_size, cfg.dim))
        self.blocks = nn.ModuleList(
            TransformerBlock(cfg.dim, cfg.n_heads, cfg.mlp_ratio) for _ in range(cfg.depth)
        )
        self.neck_proj = nn.Conv2d(cfg.dim, cfg.dim, kernel_size=1, bias=False)
        self.neck_norm = nn.LayerNorm(cfg.dim)

    def forward(self, patch: torch.Tensor) -> EncodedImage:
        if patch.ndim == 2:
            patch = patch[None]  # (1, P, P)
        elif patch.ndim == 3:
            patch = patch.permute(2, 0, 1)  # channels-last in, channels-first for conv
        else:
            raise ValueError(f"patch must be (P, P) or (P, P, ch), got {tuple(patch.shape)}")
        if patch.shape[-1] != self.patch_size or patch.shape[-2] != self.patch_size:
            raise ValueError(f"expected {self.patch_size}x{self.patch_size} patch, got {tuple(patch.shape)}")
        g = self.grid_size
        x = self.patch_embed(patch[None])[0].permute(1, 2, 0)  # (g, g, dim)
        x = (self.embed_norm(x) + self.pos_embed).reshape(g * g, -1)

        early = None
        if self.cfg.early_tap == 0:
            early = x
        for i, block in enumerate(self.blocks):
            x = block(x)
            if i + 1 == self.cfg.early_tap:
                early = x
        late = x
        emb = self.neck_proj(late.reshape(g, g, -1).permute(2, 0, 1)[None])[0].permute(1, 2, 0)
        emb = self.neck_norm(emb)
        return EncodedImage(
            embedding=emb,
            early_feat=early.reshape(g, g, -1),
            late_feat=late.reshape(g, g, -1),
        )
