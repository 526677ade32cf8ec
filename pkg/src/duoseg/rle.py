"""Run-length encoding for binary masks.

Format (bit-exact contract, shared with the browser client): the mask is
flattened row-major; runs alternate background/foreground with the FIRST
run counting background pixels (possibly 0 when the mask starts with
foreground). Run lengths sum to height*width.
"""

from __future__ import annotations

import numpy as np

__all__ = ["rle_encode", "rle_decode"]


def rle_encode(mask: np.ndarray) -> list[int]:
    flat = (np.asarray(mask).reshape(-1) > 0).astype(np.int64)
    if flat.size == 0:
        return []
    change = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0] == 1:  # first run must count background
        runs = [0] + runs
    return [int(r) for r in runs]


def rle_decode(runs: list[int], shape: tuple[int, int]) -> np.ndarray:
    total = int(np.prod(shape))
    if sum(runs) != total:
        raise ValueError(f"run lengths sum to {sum(runs)}, expected {total} for shape {shape}")
    flat = np.zeros(total, dtype=np.uint8)
    pos = 0
    value = 0
    for run in runs:
        if run < 0:
            raise ValueError("run lengths must be non-negative")
        if value:
            flat[pos : pos + run] = 1
        pos += run
        value ^= 1
    return flat.reshape(shape)
