"""Synthetic duct-like benchmark scenes.

Each scene contains large closed ring objects (a dark wall around an
interior whose texture matches the background), open-arc distractors that
share the wall's appearance but enclose nothing, and short wall-textured
debris segments scattered uniformly inside ducts and out. Ground truth is
the *filled* object region, wall and interior together. Objects are sized
comparable to the high-resolution patch, so an HR crop sees a near-straight
wall fragment or debris-strewn interior that is locally ambiguous; whether
an enclosing wall surrounds the crop is visible only in the concentric
low-resolution view.

All randomness goes through one seeded generator; the same config yields a
bitwise-identical dataset every time. Level-0 intensities are quantized to
the 8-bit grid (k/255) so lossless PNG tiles round-trip exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter, maximum_filter, minimum_filter

from .pyramid import PyramidImage, PatchPair, build_pyramid, extract_pair, valid_center_range

__all__ = [
    "SynthConfig",
    "synth_dataset",
    "save_dataset",
    "load_dataset",
    "sample_pair_centers",
    "sample_pairs",
]

# Scene texture constants (not exposed in the config on purpose: the
# benchmark is defined by object layout, not by styling knobs).
_BG_LEVEL = 0.55
_BG_NOISE = 0.10
_WALL_LEVEL = 0.25
_WALL_NOISE = 0.05
_STREAK_RATE = 1.0 / 700.0  # wall-textured debris segments per pixel, everywhere
_STREAK_LEN = (8, 20)
_GAP_RATE = 1.5  # expected broken-wall gaps per object
_GAP_SPAN = (0.15, 0.35)  # angular gap width (radians)
_WAVE_AMP = (0.15, 0.28)  # radial waviness: local wall curvature flips sign along the outline
_CENTER_ZONE = (0.30, 0.70)  # object centers live in this band of the image


@dataclass(frozen=True)
class SynthConfig:
    n_images: int
    image_size: int = 256
    n_objects: int = 1
    ring_fraction: float = 0.12
    distractor_rate: float = 1.0
    seed: int = 0
    n_levels: int = 3
    radius_frac: tuple[float, float] = (0.20, 0.25)

    def __post_init__(self):
        if self.image_size & (self.image_size - 1):
            raise ValueError(f"image_size must be a power of two, got {self.image_size}")
        if not 0.0 < self.ring_fraction < 1.0:
            raise ValueError("ring_fraction must lie in (0, 1)")
        if not 0.0 < self.radius_frac[0] <= self.radius_frac[1] < 0.5:
            raise ValueError("radius_frac must be an increasing pair in (0, 0.5)")


def _smooth_noise(shape: tuple[int, int], rng: np.random.Generator, sigma: float = 3.0) -> np.ndarray:
    n = gaussian_filter(rng.standard_normal(shape), sigma)
    s = n.std()
    return n / s if s > 0 else n


def _place_objects(cfg: SynthConfig, rng: np.random.Generator) -> list[dict]:
    """Rejection-sample non-overlapping ring objects; raises if infeasible."""
    size = cfg.image_size
    lo, hi = _CENTER_ZONE
    placed: list[dict] = []
    for _ in range(cfg.n_objects):
        for attempt in range(500):
            r0 = rng.uniform(*cfg.radius_frac) * size
            amp = rng.uniform(*_WAVE_AMP)
            cy = rng.uniform(lo * size, hi * size)
            cx = rng.uniform(lo * size, hi * size)
            r_max = r0 * (1 + amp)
            if not (r_max + 2 <= cy <= size - r_max - 2 and r_max + 2 <= cx <= size - r_max - 2):
                continue
            ok = all(
                np.hypot(cy - o["cy"], cx - o["cx"]) > r_max + o["r0"] * (1 + o["amp"]) + 4
                for o in placed
            )
            if ok:
                placed.append(
                    {
                        "cy": cy,
                        "cx": cx,
                        "r0": r0,
                        "amp": amp,
                        "k": int(rng.integers(4, 8)),
                        "phase": rng.uniform(0, 2 * np.pi),
                    }
                )
                break
        else:
            raise ValueError(
                f"cannot place {cfg.n_objects} non-overlapping objects of radius "
                f"~{cfg.radius_frac[1] * size:.0f}px on a {size}x{size} image"
            )
    return placed


def _render_scene(cfg: SynthConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    size = cfg.image_size
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    img = _BG_LEVEL + _BG_NOISE * _smooth_noise((size, size), rng)
    gt = np.zeros((size, size), dtype=np.uint8)

    objects = _place_objects(cfg, rng)
    wall_tex = _WALL_LEVEL + _WALL_NOISE * _smooth_noise((size, size), rng, sigma=1.5)

    for o in objects:
        dy, dx = yy - o["cy"], xx - o["cx"]
        d = np.hypot(dy, dx)
        theta = np.arctan2(dy, dx)
        r_theta = o["r0"] * (1 + o["amp"] * np.sin(o["k"] * theta + o["phase"]))
        inside = d <= r_theta
        wall = inside & (d > r_theta * (1 - cfg.ring_fraction))
        # broken-wall gaps (image only, ground truth untouched): local
        # boundary-following leaks through them, while ring closure stays
        # evident at the coarser magnification
        for _ in range(rng.poisson(_GAP_RATE)):
            g0 = rng.uniform(0, 2 * np.pi)
            g1 = g0 + rng.uniform(*_GAP_SPAN)
            ang = np.mod(theta - g0, 2 * np.pi)
            wall &= ang > (g1 - g0)
        gt[inside] = 1
        img[wall] = wall_tex[wall]

    # Open arcs: same wall texture, nothing enclosed, ground truth stays 0.
    n_arcs = rng.poisson(cfg.distractor_rate * max(cfg.n_objects, 1))
    for _ in range(n_arcs):
        for attempt in range(200):
            ra = rng.uniform(*cfg.radius_frac) * size
            cy = rng.uniform(0.1 * size, 0.9 * size)
            cx = rng.uniform(0.1 * size, 0.9 * size)
            ok = all(
                np.hypot(cy - o["cy"], cx - o["cx"]) > ra + o["r0"] * (1 + o["amp"]) + 4
                for o in objects
            )
            if ok:
                break
        else:
            continue  # crowded scene: drop this distractor
        a0 = rng.uniform(0, 2 * np.pi)
        span = rng.uniform(0.4 * np.pi, 0.9 * np.pi)
        amp = rng.uniform(*_WAVE_AMP)
        k = int(rng.integers(4, 8))
        phase = rng.uniform(0, 2 * np.pi)
        dy, dx = yy - cy, xx - cx
        d = np.hypot(dy, dx)
        theta_a = np.arctan2(dy, dx)
        r_theta = ra * (1 + amp * np.sin(k * theta_a + phase))
        ang = np.mod(theta_a - a0, 2 * np.pi)
        t = cfg.ring_fraction * ra
        arc = (d <= r_theta) & (d > r_theta - t) & (ang <= span)
        img[arc] = wall_tex[arc]

    # Wall-textured debris segments scattered uniformly, inside ducts and
    # out, so local appearance never reveals the label: a naive
    # flood-to-the-nearest-dark-edge strategy under-segments interiors,
    # and only the wider low-resolution view can say whether an enclosing
    # wall exists.
    n_streaks = rng.poisson(_STREAK_RATE * size * size)
    for _ in range(n_streaks):
        sy = rng.uniform(2, size - 2)
        sx = rng.uniform(2, size - 2)
        length = rng.uniform(*_STREAK_LEN)
        theta = rng.uniform(0, np.pi)
        dy, dx = yy - sy, xx - sx
        along = dy * np.sin(theta) + dx * np.cos(theta)
        across = -dy * np.cos(theta) + dx * np.sin(theta)
        seg = (np.abs(along) <= length / 2) & (np.abs(across) <= 1.2)
        img[seg] = wall_tex[seg]

    img = np.clip(img, 0.0, 1.0)
    img = np.round(img * 255.0) / 255.0  # 8-bit grid, lossless PNG round-trip
    return img, gt


def synth_dataset(cfg: SynthConfig) -> list[PyramidImage]:
    """Generate ``cfg.n_images`` pyramids, deterministic per config."""
    rng = np.random.default_rng(cfg.seed)
    out = []
    for i in range(cfg.n_images):
        img, gt = _render_scene(cfg, rng)
        pyr = build_pyramid(img, gt, cfg.n_levels, id=f"synth-{cfg.seed}-{i:04d}")
        pyr.meta.update({"config": asdict(cfg), "index": i})
        out.append(pyr)
    return out


# --- dataset directory format -------------------------------------------
#
# <out>/<id>/meta.json           id, n_levels, dims, seed + generator config
# <out>/<id>/level_<k>.npy       float64 image level (bit-exact)
# <out>/<id>/gt_<k>.png          binary mask level (0/255 grayscale PNG)


def save_dataset(pyramids: list[PyramidImage], out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for pyr in pyramids:
        d = out_dir / pyr.id
        d.mkdir(parents=True, exist_ok=True)
        meta = {
            "id": pyr.id,
            "n_levels": pyr.n_levels,
            "dims": list(pyr.level_shape(0)),
            **pyr.meta,
        }
        (d / "meta.json").write_text(json.dumps(meta, indent=2))
        for k in range(pyr.n_levels):
            np.save(d / f"level_{k}.npy", pyr.levels[k])
            Image.fromarray(pyr.gt_levels[k] * 255).save(d / f"gt_{k}.png")


def load_dataset(in_dir: str | Path) -> list[PyramidImage]:
    in_dir = Path(in_dir)
    out = []
    for d in sorted(p for p in in_dir.iterdir() if (p / "meta.json").exists()):
        meta = json.loads((d / "meta.json").read_text())
        n = meta["n_levels"]
        levels = tuple(np.load(d / f"level_{k}.npy") for k in range(n))
        gts = tuple((np.asarray(Image.open(d / f"gt_{k}.png")) > 0).astype(np.uint8) for k in range(n))
        pyr = PyramidImage(levels=levels, gt_levels=gts, id=meta["id"])
        pyr.meta.update({k: v for k, v in meta.items() if k not in ("id", "n_levels", "dims")})
        out.append(pyr)
    if not out:
        raise ValueError(f"no dataset entries found under {in_dir}")
    return out


# --- patch sampling -------------------------------------------------------


def sample_pair_centers(
    pyr: PyramidImage,
    hr_level: int,
    patch_size: int,
    n: int,
    rng: np.random.Generator,
    fg_bias: float = 0.7,
    band_bias: float = 0.0,
    band_width: int = 6,
    outer_bias: float = 0.0,
    outer_range: tuple[int, int] = (8, 24),
) -> list[tuple[int, int]]:
    """Sample n valid patch centers with configurable placement bias.

    Centers are snapped to the 2**(hr_level+1) grid required by
    ``extract_pair``. Draws come from up to four pools: with probability
    ``band_bias`` the mask boundary band (within ``band_width`` px of the
    foreground/background interface — patches straddle a wall, so which
    side to fill is locally ambiguous); with probability ``outer_bias``
    the outer shell just beyond the interface (``outer_range`` px outside
    — patches hold only a sliver of foreground, so filling everything is
    wrong); then mask foreground with probability ``fg_bias`` of the
    remainder; else uniform over all valid grid points.
    """
    align = 2 ** (hr_level + 1)
    r_lo, r_hi, c_lo, c_hi = valid_center_range(pyr, hr_level, patch_size)
    rows = np.arange(-(-r_lo // align) * align, r_hi, align)
    cols = np.arange(-(-c_lo // align) * align, c_hi, align)
    if rows.size == 0 or cols.size == 0:
        raise ValueError(
            f"patch_size {patch_size} at hr_level {hr_level} does not fit inside "
            f"a {pyr.level_shape(0)} image"
        )
    grid_r, grid_c = np.meshgrid(rows, cols, indexing="ij")
    grid_r, grid_c = grid_r.ravel(), grid_c.ravel()
    gt = pyr.gt_levels[0]
    on_fg = gt[grid_r, grid_c] > 0
    fg_idx = np.flatnonzero(on_fg)
    band_idx = np.array([], dtype=int)
    if band_bias > 0:
        size = 2 * band_width + 1
        band = maximum_filter(gt, size=size) != minimum_filter(gt, size=size)
        band_idx = np.flatnonzero(band[grid_r, grid_c])
    outer_idx = np.array([], dtype=int)
    if outer_bias > 0:
        near, far = outer_range
        reach_far = maximum_filter(gt, size=2 * far + 1) > 0
        reach_near = maximum_filter(gt, size=2 * near + 1) > 0
        outer = reach_far & ~reach_near & (gt == 0)
        outer_idx = np.flatnonzero(outer[grid_r, grid_c])

    centers = []
    for _ in range(n):
        u = rng.random()
        rest = band_bias + outer_bias
        if band_idx.size and u < band_bias:
            j = band_idx[rng.integers(band_idx.size)]
        elif outer_idx.size and u < rest:
            j = outer_idx[rng.integers(outer_idx.size)]
        elif fg_idx.size and u < rest + (1 - rest) * fg_bias:
            j = fg_idx[rng.integers(fg_idx.size)]
        else:
            j = rng.integers(grid_r.size)
        centers.append((int(grid_r[j]), int(grid_c[j])))
    return centers


def sample_pairs(
    pyramids: list[PyramidImage],
    n_per_image: int,
    hr_level: int,
    patch_size: int,
    seed: int,
    fg_bias: float = 0.7,
    band_bias: float = 0.0,
    outer_bias: float = 0.0,
    require_nonempty: bool = False,
) -> list[PatchPair]:
    """Extract a deterministic set of patch pairs across a dataset."""
    rng = np.random.default_rng(seed)
    pairs = []
    for pyr in pyramids:
        got = 0
        attempts = 0
        while got < n_per_image and attempts < 50 * n_per_image:
            attempts += 1
            (center,) = sample_pair_centers(
                pyr, hr_level, patch_size, 1, rng, fg_bias, band_bias, outer_bias=outer_bias
            )
            pair = extract_pair(pyr, center, hr_level, patch_size)
            if require_nonempty and not pair.gt_hr.any():
                continue
            pairs.append(pair)
            got += 1
    return pairs
