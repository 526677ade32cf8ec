"""Dyadic image pyramids and concentric high/low-resolution patch pairs.

A pyramid stands in for a multi-magnification slide: level k is produced
from level k-1 by exact 2x2 average pooling (images) and 2x2 max pooling
(masks), so cross-level identities hold bit-exactly in float64 and can be
asserted rather than approximated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PyramidImage",
    "PatchPair",
    "avgpool2x2",
    "maxpool2x2",
    "build_pyramid",
    "extract_pair",
    "center_crop",
    "valid_center_range",
]


def avgpool2x2(a: np.ndarray) -> np.ndarray:
    """2x2 average pooling with stride 2. Both spatial dims must be even.

    Summation order is fixed (top-left, top-right, bottom-left,
    bottom-right) so results are bit-reproducible.
    """
    h, w = a.shape[:2]
    if h % 2 or w % 2:
        raise ValueError(f"avgpool2x2 needs even dims, got {a.shape}")
    return (a[0::2, 0::2] + a[0::2, 1::2] + a[1::2, 0::2] + a[1::2, 1::2]) / 4.0


def maxpool2x2(a: np.ndarray) -> np.ndarray:
    """2x2 max pooling with stride 2, used for mask levels."""
    h, w = a.shape[:2]
    if h % 2 or w % 2:
        raise ValueError(f"maxpool2x2 needs even dims, got {a.shape}")
    return np.maximum(
        np.maximum(a[0::2, 0::2], a[0::2, 1::2]),
        np.maximum(a[1::2, 0::2], a[1::2, 1::2]),
    )


def center_crop(a: np.ndarray, size: int) -> np.ndarray:
    """Central size x size crop of a square-ish array."""
    h, w = a.shape[:2]
    r0 = (h - size) // 2
    c0 = (w - size) // 2
    return a[r0 : r0 + size, c0 : c0 + size]


@dataclass(frozen=True)
class PyramidImage:
    """A dyadic multi-level image with a matching binary mask per level.

    ``levels[k]`` has spatial dims ``levels[0].shape / 2**k``; pixel (0, 0)
    of every level covers the same world corner. Values are float64; masks
    are uint8 in {0, 1}.
    """

    levels: tuple[np.ndarray, ...]
    gt_levels: tuple[np.ndarray, ...]
    id: str
    meta: dict = field(default_factory=dict)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def level_shape(self, k: int) -> tuple[int, int]:
        return self.levels[k].shape[:2]


@dataclass(frozen=True)
class PatchPair:
    """A high-resolution patch and its concentric low-resolution partner.

    Both patches are P x P pixels; the LR patch comes from the next coarser
    level and covers twice the world extent. The central P/2 x P/2 crop of
    ``lr_patch`` covers exactly the world region of ``hr_patch``, so
    ``avgpool2x2(hr_patch) == center_crop(lr_patch, P//2)`` holds exactly.
    """

    hr_patch: np.ndarray
    lr_patch: np.ndarray
    center_world: tuple[int, int]
    hr_level: int
    gt_hr: np.ndarray
    gt_lr: np.ndarray
    source_id: str

    @property
    def patch_size(self) -> int:
        return self.hr_patch.shape[0]


def build_pyramid(image: np.ndarray, gt: np.ndarray | None, n_levels: int, id: str = "") -> PyramidImage:
    """Build an n-level dyadic pyramid from a level-0 image and mask.

    ``gt=None`` is treated as an all-background mask (useful for uploaded
    images that carry no annotation).
    """
    if n_levels < 2:
        raise ValueError(f"n_levels must be >= 2 (patch pairing needs two levels), got {n_levels}")
    image = np.asarray(image, dtype=np.float64)
    if image.ndim not in (2, 3):
        raise ValueError(f"image must be 2-D or 3-channel, got shape {image.shape}")
    h, w = image.shape[:2]
    div = 2 ** (n_levels - 1)
    if h % div or w % div:
        raise ValueError(
            f"image dims {h}x{w} must be divisible by 2**(n_levels-1)={div} "
            f"for {n_levels} dyadic levels"
        )
    if gt is None:
        gt = np.zeros((h, w), dtype=np.uint8)
    gt = np.asarray(gt)
    if gt.shape[:2] != (h, w):
        raise ValueError(f"gt shape {gt.shape} does not match image {image.shape}")
    if not np.isin(gt, (0, 1)).all():
        raise ValueError("gt mask must be strictly binary {0,1}")
    gt = gt.astype(np.uint8)

    levels = [image]
    gt_levels = [gt]
    for _ in range(n_levels - 1):
        levels.append(avgpool2x2(levels[-1]))
        gt_levels.append(maxpool2x2(gt_levels[-1]))
    return PyramidImage(levels=tuple(levels), gt_levels=tuple(gt_levels), id=id)


def valid_center_range(pyr: PyramidImage, hr_level: int, patch_size: int) -> tuple[int, int, int, int]:
    """Inclusive-exclusive bounds (r_lo, r_hi, c_lo, c_hi), in level-0
    coordinates, of centers for which both windows of ``extract_pair`` fit.
    """
    s = 2**hr_level
    h0, w0 = pyr.level_shape(0)
    half_hr = (patch_size // 2) * s       # HR window half-extent in world px
    half_lr = patch_size * s              # LR window half-extent in world px
    half = max(half_hr, half_lr)
    return half, h0 - half + 1, half, w0 - half + 1


def extract_pair(pyr: PyramidImage, center_world: tuple[int, int], hr_level: int, patch_size: int) -> PatchPair:
    """Cut a concentric HR/LR patch pair around ``center_world``.

    ``center_world`` is in level-0 pixels and must be divisible by
    2**(hr_level+1) so that both windows land on integer pixel grids and
    the concentricity identity is exact. ``patch_size`` must be a multiple
    of 4 (the central crop of the LR patch starts at offset P/4).
    """
    p = patch_size
    if p % 4:
        raise ValueError(f"patch_size must be a multiple of 4 (central P/2 crop needs offset P/4), got {p}")
    if hr_level < 0 or hr_level + 1 >= pyr.n_levels:
        raise ValueError(f"hr_level {hr_level} needs level {hr_level + 1} to exist (pyramid has {pyr.n_levels})")
    align = 2 ** (hr_level + 1)
    r, c = center_world
    if r % align or c % align:
        raise ValueError(
            f"center_world {center_world} must be divisible by {align} "
            f"for exact HR/LR alignment at hr_level={hr_level}"
        )

    def window(level: int) -> tuple[int, int]:
        cr = r // 2**level
        cc = c // 2**level
        return cr - p // 2, cc - p // 2

    for level in (hr_level, hr_level + 1):
        r0, c0 = window(level)
        h, w = pyr.level_shape(level)
        if r0 < 0 or c0 < 0 or r0 + p > h or c0 + p > w:
            raise ValueError(
                f"patch window [{r0}:{r0 + p}, {c0}:{c0 + p}] out of bounds "
                f"for level {level} of shape {h}x{w} (no padding: choose a center further from the border)"
            )

    r0, c0 = window(hr_level)
    r1, c1 = window(hr_level + 1)
    hr_patch = pyr.levels[hr_level][r0 : r0 + p, c0 : c0 + p].copy()
    lr_patch = pyr.levels[hr_level + 1][r1 : r1 + p, c1 : c1 + p].copy()
    gt_hr = pyr.gt_levels[hr_level][r0 : r0 + p, c0 : c0 + p].copy()
    gt_lr = pyr.gt_levels[hr_level + 1][r1 : r1 + p, c1 : c1 + p].copy()
    return PatchPair(
        hr_patch=hr_patch,
        lr_patch=lr_patch,
        center_world=(r, c),
        hr_level=hr_level,
        gt_hr=gt_hr,
        gt_lr=gt_lr,
        source_id=pyr.id,
    )
