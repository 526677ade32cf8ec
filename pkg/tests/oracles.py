"""Independent reference implementations used as test oracles.

Everything here is written against the *documented behavior*, not the
production code paths: nested loops, scalar accumulation, numpy only. The
point is that a bug in the package cannot hide in a shared helper.
"""

from __future__ import annotations

import math

import numpy as np

LN_EPS = 1e-5


# --- pooling / resampling --------------------------------------------------


def avgpool2x2_loops(a: np.ndarray) -> np.ndarray:
    h, w = a.shape[:2]
    out = np.zeros((h // 2, w // 2) + a.shape[2:], dtype=np.float64)
    for i in range(h // 2):
        for j in range(w // 2):
            out[i, j] = (
                a[2 * i, 2 * j] + a[2 * i, 2 * j + 1] + a[2 * i + 1, 2 * j] + a[2 * i + 1, 2 * j + 1]
            ) / 4.0
    return out


def maxpool2x2_loops(a: np.ndarray) -> np.ndarray:
    h, w = a.shape[:2]
    out = np.zeros((h // 2, w // 2), dtype=a.dtype)
    for i in range(h // 2):
        for j in range(w // 2):
            out[i, j] = max(a[2 * i, 2 * j], a[2 * i, 2 * j + 1], a[2 * i + 1, 2 * j], a[2 * i + 1, 2 * j + 1])
    return out


def bilinear_resize_loops(a: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """align_corners=False convention: src = (dst + 0.5) * scale - 0.5."""
    in_h, in_w = a.shape
    out = np.zeros((out_h, out_w), dtype=np.float64)
    for i in range(out_h):
        for j in range(out_w):
            sy = (i + 0.5) * in_h / out_h - 0.5
            sx = (j + 0.5) * in_w / out_w - 0.5
            y0 = math.floor(sy)
            x0 = math.floor(sx)
            wy = sy - y0
            wx = sx - x0
            y0c = min(max(y0, 0), in_h - 1)
            y1c = min(max(y0 + 1, 0), in_h - 1)
            x0c = min(max(x0, 0), in_w - 1)
            x1c = min(max(x0 + 1, 0), in_w - 1)
            out[i, j] = (
                a[y0c, x0c] * (1 - wy) * (1 - wx)
                + a[y0c, x1c] * (1 - wy) * wx
                + a[y1c, x0c] * wy * (1 - wx)
                + a[y1c, x1c] * wy * wx
            )
    return out


# --- primitive layers -------------------------------------------------------


def linear(x: np.ndarray, w: np.ndarray, b: np.ndarray | None) -> np.ndarray:
    y = x @ w.T
    return y if b is None else y + b


def layernorm(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + LN_EPS) * w + b


def gelu(x: np.ndarray) -> np.ndarray:
    from scipy.special import erf

    return 0.5 * x * (1.0 + erf(x / math.sqrt(2.0)))


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def softmax_row(row: np.ndarray) -> np.ndarray:
    e = np.exp(row - row.max())
    return e / e.sum()


def attention_loops(q: np.ndarray, k: np.ndarray, v: np.ndarray, p: dict, prefix: str, n_heads: int) -> np.ndarray:
    """Multi-head attention with explicit per-head, per-query loops."""
    qp = linear(q, p[f"{prefix}.q_proj.weight"], p[f"{prefix}.q_proj.bias"])
    kp = linear(k, p[f"{prefix}.k_proj.weight"], p[f"{prefix}.k_proj.bias"])
    vp = linear(v, p[f"{prefix}.v_proj.weight"], p[f"{prefix}.v_proj.bias"])
    tq, d = qp.shape
    tk = kp.shape[0]
    dh = d // n_heads
    out = np.zeros((tq, d), dtype=np.float64)
    for h in range(n_heads):
        qs = qp[:, h * dh : (h + 1) * dh]
        ks = kp[:, h * dh : (h + 1) * dh]
        vs = vp[:, h * dh : (h + 1) * dh]
        for i in range(tq):
            scores = np.zeros(tk)
            for j in range(tk):
                scores[j] = float(qs[i] @ ks[j]) / math.sqrt(dh)
            weights = softmax_row(scores)
            acc = np.zeros(dh)
            for j in range(tk):
                acc += weights[j] * vs[j]
            out[i, h * dh : (h + 1) * dh] = acc
    return linear(out, p[f"{prefix}.out_proj.weight"], p[f"{prefix}.out_proj.bias"])


def conv_transpose2x2(x_hwc: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Stride-2 kernel-2 transposed conv; w is (C_in, C_out, 2, 2)."""
    h, wd, cin = x_hwc.shape
    cout = w.shape[1]
    out = np.zeros((2 * h, 2 * wd, cout), dtype=np.float64)
    for i in range(h):
        for j in range(wd):
            for di in range(2):
                for dj in range(2):
                    for oc in range(cout):
                        out[2 * i + di, 2 * j + dj, oc] += float(x_hwc[i, j] @ w[:, oc, di, dj])
    return out + b


# --- naive decoder reference -------------------------------------------------


def _mlp(x: np.ndarray, p: dict, prefix: str, n_layers: int) -> np.ndarray:
    for i in range(n_layers):
        x = linear(x, p[f"{prefix}.layers.{i}.weight"], p[f"{prefix}.layers.{i}.bias"])
        if i + 1 < n_layers:
            x = relu(x)
    return x


def _block_mlp(x: np.ndarray, p: dict, prefix: str) -> np.ndarray:
    x = relu(linear(x, p[f"{prefix}.0.weight"], p[f"{prefix}.0.bias"]))
    return linear(x, p[f"{prefix}.2.weight"], p[f"{prefix}.2.bias"])


def _two_way_block(tokens, keys, token_pe, key_pe, p, prefix, n_heads, skip_first_pe):
    if skip_first_pe:
        tokens = attention_loops(tokens, tokens, tokens, p, f"{prefix}.self_attn", n_heads)
    else:
        q = tokens + token_pe
        tokens = tokens + attention_loops(q, q, tokens, p, f"{prefix}.self_attn", n_heads)
    tokens = layernorm(tokens, p[f"{prefix}.norm1.weight"], p[f"{prefix}.norm1.bias"])

    q = tokens + token_pe
    k = keys + key_pe
    tokens = tokens + attention_loops(q, k, keys, p, f"{prefix}.cross_t2i", n_heads)
    tokens = layernorm(tokens, p[f"{prefix}.norm2.weight"], p[f"{prefix}.norm2.bias"])
    tokens = tokens + _block_mlp(tokens, p, f"{prefix}.mlp")
    tokens = layernorm(tokens, p[f"{prefix}.norm3.weight"], p[f"{prefix}.norm3.bias"])

    q = tokens + token_pe
    k = keys + key_pe
    keys = keys + attention_loops(k, q, tokens, p, f"{prefix}.cross_i2t", n_heads)
    keys = layernorm(keys, p[f"{prefix}.norm4.weight"], p[f"{prefix}.norm4.bias"])
    return tokens, keys


def _upscale_path(feat: np.ndarray, p: dict, prefix: str) -> np.ndarray:
    x = conv_transpose2x2(feat, p[f"{prefix}.up1.weight"], p[f"{prefix}.up1.bias"])
    x = layernorm(x, p[f"{prefix}.norm.weight"], p[f"{prefix}.norm.bias"])
    x = gelu(x)
    return conv_transpose2x2(x, p[f"{prefix}.up2.weight"], p[f"{prefix}.up2.bias"])


def _fusion(dec, early, late, p):
    return (
        _upscale_path(dec, p, "fusion.path_dec")
        + _upscale_path(early, p, "fusion.path_early")
        + _upscale_path(late, p, "fusion.path_late")
    )


def _aggregate(t_hr: np.ndarray, t_lr: np.ndarray, mode: str, p: dict) -> np.ndarray:
    if mode == "avg":
        return (t_hr + t_lr) / 2.0
    if mode == "max":
        return np.maximum(t_hr, t_lr)
    return linear(np.concatenate([t_hr, t_lr], axis=-1), p["concat_fc.weight"], p["concat_fc.bias"])


def _per_pixel_product(fused: np.ndarray, w: np.ndarray) -> np.ndarray:
    h, wd, _ = fused.shape
    out = np.zeros((h, wd), dtype=np.float64)
    for i in range(h):
        for j in range(wd):
            out[i, j] = float(fused[i, j] @ w)
    return out


def _upsample2x(f: np.ndarray) -> np.ndarray:
    h, w, c = f.shape
    out = np.zeros((2 * h, 2 * w, c), dtype=np.float64)
    for ch in range(c):
        out[:, :, ch] = bilinear_resize_loops(f[:, :, ch], 2 * h, 2 * w)
    return out


def _center_crop(f: np.ndarray, size: int) -> np.ndarray:
    h, w, _ = f.shape
    r0 = (h - size) // 2
    c0 = (w - size) // 2
    return f[r0 : r0 + size, c0 : c0 + size]


def _center_paste(f: np.ndarray, size: int) -> np.ndarray:
    h, w, c = f.shape
    out = np.zeros((size, size, c), dtype=np.float64)
    r0 = (size - h) // 2
    c0 = (size - w) // 2
    out[r0 : r0 + h, c0 : c0 + w] = f
    return out


def _avgpool_feat(f: np.ndarray) -> np.ndarray:
    h, w, c = f.shape
    out = np.zeros((h // 2, w // 2, c), dtype=np.float64)
    for ch in range(c):
        out[:, :, ch] = avgpool2x2_loops(f[:, :, ch])
    return out


def decode_reference(
    params: dict[str, np.ndarray],
    n_heads: int,
    hr: dict[str, np.ndarray],
    lr: dict[str, np.ndarray],
    prompt_tokens: np.ndarray,
    dense_hr: np.ndarray,
    dense_lr: np.ndarray,
    image_pe: np.ndarray,
    mode: str,
    target: str,
    placement: str,
    output_size: int,
    depth: int = 2,
) -> tuple[np.ndarray, np.ndarray]:
    """Straight-line reimplementation of the dual-branch decoder forward."""
    p = params
    g = hr["embedding"].shape[0]
    d = hr["embedding"].shape[2]
    base_tokens = np.concatenate(
        [p["iou_token"], p["mask_tokens"], p["hr_token"], p["lr_token"], prompt_tokens], axis=0
    )
    key_pe = image_pe.reshape(g * g, d)

    if target == "hr_self_context":
        lr = {
            "embedding": _center_paste(_avgpool_feat(hr["embedding"]), g),
            "early": _center_paste(_avgpool_feat(hr["early"]), g),
            "late": _center_paste(_avgpool_feat(hr["late"]), g),
        }

    state = {
        "hr": {"tokens": base_tokens.copy(), "keys": (hr["embedding"] + dense_hr).reshape(g * g, d)},
        "lr": {"tokens": base_tokens.copy(), "keys": (lr["embedding"] + dense_lr).reshape(g * g, d)},
    }

    for i in range(depth):
        for br in ("hr", "lr"):
            state[br]["tokens"], state[br]["keys"] = _two_way_block(
                state[br]["tokens"], state[br]["keys"], base_tokens, key_pe,
                p, f"blocks.{i}", n_heads, skip_first_pe=(i == 0),
            )
        if target == "token_agg" and placement == "after_block_1" and i + 1 < depth:
            t_mid = _aggregate(state["hr"]["tokens"][4:5], state["lr"]["tokens"][5:6], mode, p)
            for br in ("hr", "lr"):
                t = state[br]["tokens"]
                state[br]["tokens"] = np.concatenate([t[:4], t_mid, t_mid, t[6:]], axis=0)

    for br in ("hr", "lr"):
        q = state[br]["tokens"] + base_tokens
        k = state[br]["keys"] + key_pe
        att = attention_loops(q, k, state[br]["keys"], p, "final_attn", n_heads)
        state[br]["tokens"] = layernorm(state[br]["tokens"] + att, p["norm_final.weight"], p["norm_final.bias"])

    fused_hr = _fusion(state["hr"]["keys"].reshape(g, g, d), hr["early"], hr["late"], p)
    fused_lr = _fusion(state["lr"]["keys"].reshape(g, g, d), lr["early"], lr["late"], p)

    if target == "token_agg":
        t_bar = _aggregate(state["hr"]["tokens"][4:5], state["lr"]["tokens"][5:6], mode, p)
        w = _mlp(t_bar, p, "mask_head", 3).reshape(-1)
        hr_low = _per_pixel_product(fused_hr, w)
        lr_low = _per_pixel_product(fused_lr, w)
    else:
        if target == "feature_avg":
            context = _upsample2x(_center_crop(fused_lr, fused_lr.shape[0] // 2))
        else:
            context = _upsample2x(_avgpool_feat(fused_hr))
        fused_hr = (fused_hr + context) / 2.0
        w_hr = _mlp(state["hr"]["tokens"][4:5], p, "mask_head", 3).reshape(-1)
        w_lr = _mlp(state["lr"]["tokens"][5:6], p, "mask_head", 3).reshape(-1)
        hr_low = _per_pixel_product(fused_hr, w_hr)
        lr_low = _per_pixel_product(fused_lr, w_lr)

    def to_out(x: np.ndarray) -> np.ndarray:
        return x if x.shape[0] == output_size else bilinear_resize_loops(x, output_size, output_size)

    return to_out(hr_low), to_out(lr_low)


# --- loss / metric oracles ----------------------------------------------------


def seg_loss_loops(logits: np.ndarray, gt: np.ndarray, hr_weight_unused=None, *, dice_eps: float, ce_weight: float, dice_weight: float) -> float:
    h, w = logits.shape
    inter = psum = gsum = 0.0
    bce = 0.0
    for i in range(h):
        for j in range(w):
            z = float(logits[i, j])
            g = float(gt[i, j])
            s = 1.0 / (1.0 + math.exp(-z))
            inter += s * g
            psum += s
            gsum += g
            # numerically plain form; fine for the magnitudes used in tests
            bce += -(g * math.log(s) + (1 - g) * math.log(1 - s))
    dice = 1.0 - (2.0 * inter + dice_eps) / (psum + gsum + dice_eps)
    return dice_weight * dice + ce_weight * bce / (h * w)


def dice_loops(pred: np.ndarray, gt: np.ndarray) -> float:
    h, w = pred.shape
    inter = np_ = ng = 0
    for i in range(h):
        for j in range(w):
            a = 1 if pred[i, j] > 0 else 0
            b = 1 if gt[i, j] > 0 else 0
            inter += a & b
            np_ += a
            ng += b
    if np_ + ng == 0:
        return 1.0
    return 2.0 * inter / (np_ + ng)
