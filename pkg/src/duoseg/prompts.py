"""Prompt simulation from ground-truth masks, and prompt-to-token encoding.

Simulators mimic a human annotator: a jittered bounding box, uniformly
sampled positive/negative clicks, and a coarse mask whose boundary band is
corrupted by Gaussian noise. All are pure functions of (inputs, rng).

The encoder turns prompts into decoder inputs: one token per point (random
Fourier positional features plus a learned label embedding), two corner
tokens per box, and a dense embedding for coarse masks. A single sparse
token set, expressed in HR-patch coordinates, is shared by both decoder
branches; the dense mask embedding is resampled per branch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn
from scipy.ndimage import maximum_filter, minimum_filter

from .pyramid import avgpool2x2

__all__ = [
    "BoxPrompt",
    "PointPrompt",
    "CoarseMask",
    "EncodedPrompts",
    "simulate_box",
    "sample_points",
    "degrade_mask",
    "coarse_mask_for_lr",
    "parse_prompt_json",
    "PromptEncoder",
]


@dataclass(frozen=True)
class BoxPrompt:
    """Half-open (r0, c0, r1, c1) box in HR-patch pixel coordinates."""

    box: tuple[int, int, int, int]

    def __post_init__(self):
        r0, c0, r1, c1 = self.box
        if not (r0 < r1 and c0 < c1):
            raise ValueError(f"degenerate box {self.box}")


@dataclass(frozen=True)
class PointPrompt:
    points: tuple[tuple[int, int], ...]
    labels: tuple[int, ...]  # 1 positive, 0 negative

    def __post_init__(self):
        if len(self.points) != len(self.labels):
            raise ValueError("points and labels must have equal length")
        if any(l not in (0, 1) for l in self.labels):
            raise ValueError("labels must be 0 or 1")


@dataclass(frozen=True)
class CoarseMask:
    mask: np.ndarray

    def __post_init__(self):
        if not np.isin(self.mask, (0, 1)).all():
            raise ValueError("coarse mask must be binary {0,1}")


def simulate_box(gt: np.ndarray, jitter_frac: float, rng: np.random.Generator) -> BoxPrompt:
    """Tight bounding box of gt with Gaussian edge jitter.

    Each edge shifts independently by N(0, jitter_frac * side) pixels along
    its axis, then the box is rounded and clipped to the patch. Degenerate
    draws are retried up to 10 times before falling back to the tight box.
    """
    if not gt.any():
        raise ValueError("cannot simulate a box prompt from an empty mask")
    rows = np.flatnonzero(gt.any(axis=1))
    cols = np.flatnonzero(gt.any(axis=0))
    tight = (rows[0], cols[0], rows[-1] + 1, cols[-1] + 1)
    if jitter_frac == 0:
        return BoxPrompt(tight)

    h, w = gt.shape
    height, width = tight[2] - tight[0], tight[3] - tight[1]
    std = (jitter_frac * height, jitter_frac * width)
    for _ in range(10):
        r0 = int(np.clip(round(tight[0] + rng.normal(0, std[0])), 0, h))
        r1 = int(np.clip(round(tight[2] + rng.normal(0, std[0])), 0, h))
        c0 = int(np.clip(round(tight[1] + rng.normal(0, std[1])), 0, w))
        c1 = int(np.clip(round(tight[3] + rng.normal(0, std[1])), 0, w))
        if r0 < r1 and c0 < c1:
            return BoxPrompt((r0, c0, r1, c1))
    return BoxPrompt(tight)


def sample_points(gt: np.ndarray, n_pos: int, n_neg: int, rng: np.random.Generator) -> PointPrompt:
    """Uniform without-replacement clicks from foreground and background."""
    if n_pos + n_neg < 1:
        raise ValueError("at least one point is required (the decoder needs >= 1 prompt)")
    fg = np.argwhere(gt > 0)
    bg = np.argwhere(gt == 0)
    if len(fg) < n_pos:
        raise ValueError(f"mask has {len(fg)} foreground pixels, need {n_pos}")
    if len(bg) < n_neg:
        raise ValueError(f"mask has {len(bg)} background pixels, need {n_neg}")
    points: list[tuple[int, int]] = []
    labels: list[int] = []
    if n_pos:
        idx = rng.choice(len(fg), size=n_pos, replace=False)
        points += [tuple(map(int, fg[i])) for i in idx]
        labels += [1] * n_pos
    if n_neg:
        idx = rng.choice(len(bg), size=n_neg, replace=False)
        points += [tuple(map(int, bg[i])) for i in idx]
        labels += [0] * n_neg
    return PointPrompt(tuple(points), tuple(labels))


def degrade_mask(gt: np.ndarray, boundary_width: int, noise_std: float, rng: np.random.Generator) -> CoarseMask:
    """Flip pixels near the mask boundary where |N(0, noise_std)| > 0.5.

    The boundary band is every pixel within Chebyshev distance
    ``boundary_width`` of the foreground/background interface; the flip
    rate inside it is 2*Phi(-0.5/noise_std). Pixels outside the band are
    untouched, and an empty (or full) mask has no band at all.
    """
    if boundary_width < 1:
        raise ValueError("boundary_width must be >= 1")
    gt = np.asarray(gt, dtype=np.uint8)
    out = gt.copy()
    size = 2 * boundary_width + 1
    band = maximum_filter(gt, size=size) != minimum_filter(gt, size=size)
    if noise_std > 0 and band.any():
        noise = rng.normal(0.0, noise_std, size=int(band.sum()))
        flips = np.abs(noise) > 0.5
        vals = out[band]
        vals[flips] = 1 - vals[flips]
        out[band] = vals
    return CoarseMask(out)


def coarse_mask_for_lr(mask: np.ndarray) -> np.ndarray:
    """Resample an HR-frame coarse mask into the LR patch frame.

    The HR patch occupies the central quarter of the LR patch's world
    extent: the mask is average-pooled 2x and pasted into the center of a
    zero canvas (values become fractional coverage in [0, 1]).
    """
    p = mask.shape[0]
    out = np.zeros((p, p), dtype=np.float64)
    small = avgpool2x2(mask.astype(np.float64))
    q = p // 4
    out[q : q + p // 2, q : q + p // 2] = small
    return out


def parse_prompt_json(data: dict, patch_size: int) -> dict:
    """Parse the shared prompt JSON schema into prompt objects.

    Schema: ``{"points": [[r, c], ...], "labels": [1, 0, ...],
    "box": [r0, c0, r1, c1], "mask_path": "..."}`` — every field optional,
    at least one prompt required. Coordinates are HR-patch pixels;
    ``mask_path`` names a binary PNG readable by the process.
    """
    known = {"points", "labels", "box", "mask_path"}
    extra = set(data) - known
    if extra:
        raise ValueError(f"unknown prompt fields: {sorted(extra)}")
    out: dict = {}
    if data.get("points"):
        pts = [(int(r), int(c)) for r, c in data["points"]]
        labels = data.get("labels")
        if labels is None:
            labels = [1] * len(pts)
        for r, c in pts:
            if not (0 <= r < patch_size and 0 <= c < patch_size):
                raise ValueError(f"point ({r}, {c}) outside patch of size {patch_size}")
        out["points"] = PointPrompt(tuple(pts), tuple(int(l) for l in labels))
    if data.get("box"):
        r0, c0, r1, c1 = (int(v) for v in data["box"])
        box = (max(r0, 0), max(c0, 0), min(r1, patch_size), min(c1, patch_size))
        out["box"] = BoxPrompt(box)
    if data.get("mask_path"):
        from PIL import Image

        mask = (np.asarray(Image.open(data["mask_path"]).convert("L")) > 0).astype(np.uint8)
        if mask.shape != (patch_size, patch_size):
            raise ValueError(f"mask_path image is {mask.shape}, expected {(patch_size, patch_size)}")
        out["coarse"] = CoarseMask(mask)
    if not out:
        raise ValueError("at least one prompt (points, box, or mask_path) is required")
    return out


@dataclass
class EncodedPrompts:
    """Decoder-ready prompt package.

    ``tokens`` is (N, D) with one row per point and two per box corner.
    ``dense_hr`` / ``dense_lr`` are (H', W', D) maps added to the branch
    image embeddings (the learned no-mask embedding when no coarse mask was
    given). ``image_pe`` is the (H', W', D) positional grid the decoder
    uses for cross-attention keys.
    """

    tokens: torch.Tensor
    dense_hr: torch.Tensor
    dense_lr: torch.Tensor
    image_pe: torch.Tensor

    @property
    def n_tokens(self) -> int:
        return self.tokens.shape[0]


class PromptEncoder(nn.Module):
    """Positional prompt encoding with learned type embeddings.

    Coordinates are normalized to [0, 1] over the patch and lifted with a
    fixed random Fourier map; labels and box corners add learned
    embeddings. Coarse masks run through a small strided conv stack down to
    the embedding grid.
    """

    def __init__(self, dim: int, patch_size: int, grid_size: int):
        super().__init__()
        if patch_size % grid_size:
            raise ValueError(f"patch_size {patch_size} must be divisible by grid_size {grid_size}")
        factor = patch_size // grid_size
        if factor & (factor - 1):
            raise ValueError(f"patch/grid ratio must be a power of two, got {factor}")
        if dim % 2:
            raise ValueError("dim must be even for Fourier position features")
        self.dim = dim
        self.patch_size = patch_size
        self.grid_size = grid_size

        gen = torch.Generator().manual_seed(0x5EED)
        self.register_buffer("fourier", torch.randn((2, dim // 2), generator=gen, dtype=torch.float64))
        self.point_embed = nn.Embedding(2, dim)  # 0: negative, 1: positive
        self.corner_embed = nn.Embedding(2, dim)  # 0: top-left, 1: bottom-right
        self.no_mask_embed = nn.Embedding(1, dim)
        self.pad_embed = nn.Embedding(1, dim)  # stands in when only a coarse mask is given

        convs: list[nn.Module] = []
        chans = 1
        n_down = factor.bit_length() - 1
        for i in range(n_down):
            nxt = min(4 * 2**i, dim)
            convs += [nn.Conv2d(chans, nxt, kernel_size=2, stride=2), nn.GELU()]
            chans = nxt
        convs.append(nn.Conv2d(chans, dim, kernel_size=1))
        self.mask_downscale = nn.Sequential(*convs)

    def _positional(self, coords: torch.Tensor) -> torch.Tensor:
        """Random Fourier features of coords normalized to [0, 1]."""
        norm = coords.to(self.fourier.dtype) / self.patch_size
        proj = (2 * norm - 1) @ self.fourier * (2 * torch.pi)
        return torch.cat([torch.sin(proj), torch.cos(proj)], dim=-1)

    def image_pe(self) -> torch.Tensor:
        """Positional grid (H', W', D) at embedding-cell centers."""
        g = self.grid_size
        step = self.patch_size / g
        rows = torch.arange(g, dtype=torch.float64) * step + step / 2
        cols = torch.arange(g, dtype=torch.float64) * step + step / 2
        rr, cc = torch.meshgrid(rows, cols, indexing="ij")
        coords = torch.stack([rr, cc], dim=-1).to(self.fourier.device)
        return self._positional(coords).to(self.point_embed.weight.dtype)

    def forward(
        self,
        points: PointPrompt | None = None,
        box: BoxPrompt | None = None,
        coarse: CoarseMask | None = None,
    ) -> EncodedPrompts:
        if points is None and box is None and coarse is None:
            raise ValueError("at least one prompt is required")
        dtype = self.point_embed.weight.dtype
        device = self.point_embed.weight.device
        rows: list[torch.Tensor] = []
        if points is not None:
            coords = torch.tensor(points.points, dtype=torch.float64, device=device) + 0.5
            pe = self._positional(coords).to(dtype)
            labels = torch.tensor(points.labels, dtype=torch.long, device=device)
            rows.append(pe + self.point_embed(labels))
        if box is not None:
            r0, c0, r1, c1 = box.box
            corners = torch.tensor([[r0, c0], [r1, c1]], dtype=torch.float64, device=device)
            pe = self._positional(corners).to(dtype)
            rows.append(pe + self.corner_embed.weight)
        tokens = torch.cat(rows, dim=0) if rows else self.pad_embed.weight

        g = self.grid_size
        if coarse is not None:
            hr = torch.as_tensor(coarse.mask, dtype=dtype, device=device)
            lr = torch.as_tensor(coarse_mask_for_lr(coarse.mask), dtype=dtype, device=device)
            dense_hr = self.mask_downscale(hr[None, None])[0].permute(1, 2, 0)
            dense_lr = self.mask_downscale(lr[None, None])[0].permute(1, 2, 0)
        else:
            dense_hr = self.no_mask_embed.weight.reshape(1, 1, -1).expand(g, g, -1)
            dense_lr = dense_hr
        return EncodedPrompts(tokens=tokens, dense_hr=dense_hr, dense_lr=dense_lr, image_pe=self.image_pe())
