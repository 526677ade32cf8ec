/** Pure pixel-buffer helpers for mask overlays (canvas-free, testable). */

import type { Extent, PredictResponse } from "./api.js";
import { rleDecode } from "./rle.js";
import { hrFootprintWithinLr } from "./state.js";

export interface OverlayData {
  maskHr: Uint8Array;
  maskLr: Uint8Array;
  height: number;
  width: number;
  hrExtent: Extent;
  lrExtent: Extent;
  /** HR patch footprint in LR-pane unit coordinates (central quarter). */
  footprint: { u0: number; v0: number; u1: number; v1: number };
  latencyMs: number;
}

export function overlayFromResponse(resp: PredictResponse): OverlayData {
  const [h, w] = resp.mask_shape;
  return {
    maskHr: rleDecode(resp.hr_mask_rle, h, w),
    maskLr: rleDecode(resp.lr_mask_rle, h, w),
    height: h,
    width: w,
    hrExtent: resp.hr_extent,
    lrExtent: resp.lr_extent,
    footprint: hrFootprintWithinLr(resp.hr_extent, resp.lr_extent),
    latencyMs: resp.latency_ms,
  };
}

/** RGBA buffer with `color` where the mask is set, transparent elsewhere. */
export function maskToRgba(
  mask: Uint8Array,
  color: [number, number, number],
  alpha = 140,
): Uint8ClampedArray {
  const out = new Uint8ClampedArray(mask.length * 4);
  for (let i = 0; i < mask.length; i++) {
    if (mask[i]) {
      out[4 * i] = color[0];
      out[4 * i + 1] = color[1];
      out[4 * i + 2] = color[2];
      out[4 * i + 3] = alpha;
    }
  }
  return out;
}

export function maskArea(mask: Uint8Array): number {
  let n = 0;
  for (const v of mask) if (v) n++;
  return n;
}
