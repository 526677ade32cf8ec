"""Two-resolution training objective and frozen-base training loop.

The loss is a convex combination of per-resolution segmentation losses,
each a weighted sum of soft Dice and binary cross-entropy. Only the new
parameters (resolution tokens, fusion paths, the new mask head, and the
concat projection when in use) receive gradient updates; everything else
plays the role of a frozen pretrained base.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .decoder import AggregationMode, DecodeTarget, MaskPrediction
from .model import DuoSegModel
from .prompts import simulate_box, sample_points, degrade_mask
from .pyramid import PatchPair, PyramidImage
from .synth import sample_pairs

__all__ = [
    "LossConfig",
    "TrainConfig",
    "ParamPartition",
    "TrainingDiverged",
    "TrainResult",
    "seg_loss",
    "total_loss",
    "partition_parameters",
    "train",
    "write_loss_curve",
]


@dataclass(frozen=True)
class LossConfig:
    hr_weight: float = 0.5  # weight on the high-resolution loss; LR gets 1 - hr_weight
    dice_eps: float = 1.0
    ce_weight: float = 1.0
    dice_weight: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.hr_weight <= 1.0:
            raise ValueError(f"hr_weight must lie in [0, 1], got {self.hr_weight}")
        if self.dice_eps <= 0:
            raise ValueError("dice_eps must be positive")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.001
    batch_size: int = 1
    steps: int = 1000
    seed: int = 0
    hr_level: int = 0
    fg_bias: float = 0.7
    band_bias: float = 0.0
    outer_bias: float = 0.0
    box_jitter: float = 0.1
    prompt_mix: dict[str, float] = field(
        default_factory=lambda: {"box": 1 / 3, "point": 1 / 3, "coarse": 1 / 3}
    )

    def __post_init__(self):
        if set(self.prompt_mix) - {"box", "point", "coarse"}:
            raise ValueError(f"unknown prompt kinds in mix: {self.prompt_mix}")
        total = sum(self.prompt_mix.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"prompt_mix proportions must sum to 1, got {total}")


@dataclass(frozen=True)
class ParamPartition:
    """Disjoint frozen/learnable split covering every model parameter."""

    frozen: tuple[str, ...]
    learnable: tuple[str, ...]


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int, prompt_kind: str, sample_id: str, loss_value: float):
        super().__init__(
            f"non-finite loss ({loss_value}) at step {step} "
            f"(prompt={prompt_kind}, sample={sample_id})"
        )
        self.step = step
        self.prompt_kind = prompt_kind
        self.sample_id = sample_id


@dataclass
class TrainResult:
    model: DuoSegModel
    loss_curve: list[tuple[int, float, float, float]]  # (step, L, L_high, L_low)


def seg_loss(logits: torch.Tensor, gt: np.ndarray | torch.Tensor, cfg: LossConfig) -> torch.Tensor:
    """dice_weight * soft-Dice loss + ce_weight * mean BCE on logits."""
    gt_t = torch.as_tensor(np.asarray(gt), dtype=logits.dtype, device=logits.device)
    if logits.shape != gt_t.shape:
        raise ValueError(f"shape mismatch: logits {tuple(logits.shape)} vs gt {tuple(gt_t.shape)}")
    p = torch.sigmoid(logits)
    inter = (p * gt_t).sum()
    dice = 1.0 - (2.0 * inter + cfg.dice_eps) / (p.sum() + gt_t.sum() + cfg.dice_eps)
    bce = F.binary_cross_entropy_with_logits(logits, gt_t)
    return cfg.dice_weight * dice + cfg.ce_weight * bce


def total_loss(
    pred: MaskPrediction,
    gt_hr: np.ndarray | torch.Tensor,
    gt_lr: np.ndarray | torch.Tensor,
    cfg: LossConfig,
) -> torch.Tensor:
    lam = cfg.hr_weight
    return lam * seg_loss(pred.hr_logits, gt_hr, cfg) + (1.0 - lam) * seg_loss(pred.lr_logits, gt_lr, cfg)


def partition_parameters(model: DuoSegModel) -> ParamPartition:
    """Classify every parameter as frozen base or learnable addition.

    The concat projection counts as learnable only when the configured
    aggregation actually uses it; likewise the dedicated mask head is
    learnable only when it is not replaced by the shared (frozen) output
    hypernetwork. Unused additions sit on the frozen side so that "every
    learnable tensor changes during training" holds.
    """
    cfg = model.cfg
    uses_concat = (
        cfg.aggregation_mode == AggregationMode.CONCAT_FC.value
        and cfg.target == DecodeTarget.TOKEN_AGG.value
    )
    prefixes = ["decoder.hr_token", "decoder.lr_token", "decoder.fusion."]
    if uses_concat:
        prefixes.append("decoder.concat_fc.")
    if not cfg.share_head_with_output_tokens:
        prefixes.append("decoder.mask_head.")

    frozen, learnable = [], []
    for name, _ in model.named_parameters():
        (learnable if any(name.startswith(p) for p in prefixes) else frozen).append(name)
    return ParamPartition(frozen=tuple(frozen), learnable=tuple(learnable))


def _apply_partition(model: DuoSegModel, part: ParamPartition) -> list[torch.nn.Parameter]:
    params = dict(model.named_parameters())
    for name in part.frozen:
        params[name].requires_grad_(False)
    out = []
    for name in part.learnable:
        params[name].requires_grad_(True)
        out.append(params[name])
    return out


def _simulate_prompt(model: DuoSegModel, pair: PatchPair, kind: str, tcfg: TrainConfig, rng: np.random.Generator):
    gt = pair.gt_hr
    if kind == "box":
        return {"box": simulate_box(gt, tcfg.box_jitter, rng)}
    if kind == "point":
        n_pos = int(rng.integers(1, 4))
        n_pos = min(n_pos, int(gt.sum()))
        has_bg = int((gt == 0).sum()) > 0
        n_neg = int(rng.integers(0, 2)) if has_bg else 0
        return {"points": sample_points(gt, n_pos, n_neg, rng)}
    if kind == "coarse":
        width = max(1, round(0.05 * pair.patch_size))
        return {"coarse": degrade_mask(gt, width, 0.5, rng)}
    raise ValueError(f"unknown prompt kind {kind}")


def _draw_pair(
    dataset: list[PyramidImage] | list[PatchPair],
    tcfg: TrainConfig,
    patch_size: int,
    rng: np.random.Generator,
) -> PatchPair:
    if isinstance(dataset[0], PatchPair):
        for _ in range(100):
            pair = dataset[int(rng.integers(len(dataset)))]
            if pair.gt_hr.any():
                return pair
        raise ValueError("dataset contains no patch pair with foreground")
    pyr = dataset[int(rng.integers(len(dataset)))]
    pairs = sample_pairs(
        [pyr], 1, tcfg.hr_level, patch_size, seed=int(rng.integers(2**31)),
        fg_bias=tcfg.fg_bias, band_bias=tcfg.band_bias, outer_bias=tcfg.outer_bias,
        require_nonempty=True,
    )
    if not pairs:
        raise ValueError(f"could not sample a foreground patch from {pyr.id}")
    return pairs[0]


def train(
    model: DuoSegModel,
    dataset: list[PyramidImage] | list[PatchPair],
    tcfg: TrainConfig,
    lcfg: LossConfig,
) -> TrainResult:
    """Optimize the learnable additions; the frozen base never changes.

    Each step draws one patch pair (foreground-containing), simulates one
    prompt of a kind drawn from ``prompt_mix``, runs the dual-branch
    forward, and takes one Adam step on the combined two-resolution loss.
    Deterministic for a fixed (model state, dataset, config) triple.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    part = partition_parameters(model)
    learnable = _apply_partition(model, part)
    opt = torch.optim.Adam(learnable, lr=tcfg.lr)
    rng = np.random.default_rng(tcfg.seed)
    kinds = sorted(tcfg.prompt_mix)
    probs = np.array([tcfg.prompt_mix[k] for k in kinds])

    curve: list[tuple[int, float, float, float]] = []
    for step in range(tcfg.steps):
        opt.zero_grad()
        batch_total = batch_high = batch_low = 0.0
        loss_acc: torch.Tensor | None = None
        for _ in range(tcfg.batch_size):
            pair = _draw_pair(dataset, tcfg, model.cfg.patch_size, rng)
            kind = str(rng.choice(kinds, p=probs))
            prompts = model.encode_prompts(**_simulate_prompt(model, pair, kind, tcfg, rng))
            pred = model(pair, prompts)
            l_high = seg_loss(pred.hr_logits, pair.gt_hr, lcfg)
            l_low = seg_loss(pred.lr_logits, pair.gt_lr, lcfg)
            loss = lcfg.hr_weight * l_high + (1.0 - lcfg.hr_weight) * l_low
            if not torch.isfinite(loss):
                raise TrainingDiverged(step, kind, pair.source_id, float(loss.detach()))
            loss_acc = loss if loss_acc is None else loss_acc + loss
            batch_total += float(loss.detach())
            batch_high += float(l_high.detach())
            batch_low += float(l_low.detach())
        (loss_acc / tcfg.batch_size).backward()
        opt.step()
        b = tcfg.batch_size
        curve.append((step, batch_total / b, batch_high / b, batch_low / b))
    return TrainResult(model=model, loss_curve=curve)


def write_loss_curve(curve: list[tuple[int, float, float, float]], path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "loss", "loss_high", "loss_low"])
        writer.writerows(curve)
